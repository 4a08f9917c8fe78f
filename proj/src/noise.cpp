#include "hhsplit/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hhsplit {

namespace {

constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

inline double to_open_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller on four uniforms.
inline std::array<double, 4> normals_from_block(const Philox4x64::Counter& r) {
    std::array<double, 4> out{};
    for (int p = 0; p < 2; ++p) {
        const double radius = std::sqrt(-2.0 * std::log(to_open_unit(r[2 * p])));
        const double angle = 2.0 * std::numbers::pi * to_open_unit(r[2 * p + 1]);
        out[2 * p] = radius * std::cos(angle);
        out[2 * p + 1] = radius * std::sin(angle);
    }
    return out;
}

}  // namespace

Philox4x64::Counter Philox4x64::block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kW0;
            key[1] += kW1;
        }
        std::uint64_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, ctr[0], hi0, lo0);
        mulhilo(kM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

CounterStream::CounterStream(std::uint64_t seed, StreamTag tag, std::uint64_t substream)
    : key_{seed, static_cast<std::uint64_t>(tag)}, substream_(substream) {}

Philox4x64::Counter CounterStream::counter(std::uint64_t block_index) const {
    return {block_index, substream_, 0, 0};
}

double CounterStream::normal(std::uint64_t index) const {
    const auto block = Philox4x64::block(counter(index / 4), key_);
    return normals_from_block(block)[index % 4];
}

double CounterStream::uniform(std::uint64_t index) const {
    const auto block = Philox4x64::block(counter(index / 4), key_);
    return to_open_unit(block[index % 4]);
}

void CounterStream::fill_normal(std::uint64_t first, std::span<double> out) const {
    std::size_t pos = 0;
    std::uint64_t index = first;
    while (pos < out.size()) {
        const auto values = normals_from_block(Philox4x64::block(counter(index / 4), key_));
        for (std::uint64_t j = index % 4; j < 4 && pos < out.size(); ++j, ++index)
            out[pos++] = values[j];
    }
}

std::int64_t aligned_ratio(double dt, double base_dt) {
    if (!(dt > 0) || !(base_dt > 0) || !std::isfinite(dt) || !std::isfinite(base_dt))
        throw std::invalid_argument("step sizes must be positive and finite");
    const double ratio = dt / base_dt;
    const double rounded = std::round(ratio);
    if (rounded < 1 || std::abs(ratio - rounded) > 1e-9 * rounded)
        throw std::invalid_argument("step " + std::to_string(dt) +
                                    " is not an integer multiple of the base step " +
                                    std::to_string(base_dt));
    return static_cast<std::int64_t>(rounded);
}

void NoisePlan::validate() const {
    if (n_paths < 1) throw std::invalid_argument("noise plan needs at least one path");
    if (!(t_end > 0) || !std::isfinite(t_end))
        throw std::invalid_argument("noise plan horizon must be positive");
    if (!(base_dt > 0) || !std::isfinite(base_dt))
        throw std::invalid_argument("noise plan base step must be positive");
    aligned_ratio(t_end, base_dt);
}

std::int64_t NoisePlan::n_base_steps() const { return aligned_ratio(t_end, base_dt); }

std::int64_t NoisePlan::steps_per(double dt) const { return aligned_ratio(dt, base_dt); }

PathNoise::PathNoise(const NoisePlan& plan, std::int64_t path_index, bool materialize)
    : plan_(plan),
      path_index_(path_index),
      n_steps_(0),
      scale_(std::sqrt(plan.base_dt)),
      stream_(plan.master_seed, StreamTag::brownian, static_cast<std::uint64_t>(path_index)) {
    plan_.validate();
    if (path_index < 0 || path_index >= plan_.n_paths)
        throw std::out_of_range("path index " + std::to_string(path_index) + " outside [0, " +
                                std::to_string(plan_.n_paths) + ")");
    n_steps_ = plan_.n_base_steps();
    if (materialize) {
        increments_.resize(static_cast<std::size_t>(n_steps_));
        stream_.fill_normal(0, increments_);
        for (double& x : increments_) x *= scale_;
    }
}

double PathNoise::increment(std::int64_t k) const {
    if (k < 0 || k >= n_steps_) throw std::out_of_range("base increment index out of range");
    if (!increments_.empty()) return increments_[static_cast<std::size_t>(k)];
    return scale_ * stream_.normal(static_cast<std::uint64_t>(k));
}

std::span<const double> PathNoise::window(std::int64_t first, std::int64_t count,
                                          std::vector<double>& scratch) const {
    if (first < 0 || count < 0 || first + count > n_steps_)
        throw std::out_of_range("noise window [" + std::to_string(first) + ", " +
                                std::to_string(first + count) + ") exceeds the path horizon");
    if (!increments_.empty())
        return std::span<const double>(increments_).subspan(static_cast<std::size_t>(first),
                                                            static_cast<std::size_t>(count));
    scratch.resize(static_cast<std::size_t>(count));
    stream_.fill_normal(static_cast<std::uint64_t>(first), scratch);
    for (double& x : scratch) x *= scale_;
    return scratch;
}

PathNoise generate_path_noise(const NoisePlan& plan, std::int64_t path_index) {
    return PathNoise(plan, path_index, true);
}

namespace {

double sum(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
}

}  // namespace

double xi_at(const PathNoise& noise, std::int64_t step_index, double dt, Window half) {
    const std::int64_t m = noise.plan().steps_per(dt);
    const double h = noise.plan().base_dt;
    std::vector<double> scratch;
    const auto inc = noise.window(step_index * m, m, scratch);
    if (half == Window::full) return sum(inc) / std::sqrt(static_cast<double>(m) * h);
    if (m % 2 != 0)
        throw std::invalid_argument("half-step noise needs an even number of base increments per step");
    const auto part = half == Window::first_half ? inc.first(static_cast<std::size_t>(m / 2))
                                                 : inc.last(static_cast<std::size_t>(m / 2));
    return sum(part) / std::sqrt(static_cast<double>(m / 2) * h);
}

double StepNoise::dw(double dt) const { return xi * std::sqrt(dt); }

StepNoise step_noise(const PathNoise& noise, std::int64_t step_index, double dt, bool need_halves,
                     std::vector<double>& scratch) {
    const std::int64_t m = noise.plan().steps_per(dt);
    if (need_halves && m % 2 != 0)
        throw std::invalid_argument("half-step noise needs an even number of base increments per step");
    const double h = noise.plan().base_dt;
    StepNoise s;
    s.base_dt = h;
    s.increments = noise.window(step_index * m, m, scratch);
    if (need_halves) {
        const auto half = static_cast<std::size_t>(m / 2);
        const double s1 = sum(s.increments.first(half));
        const double s2 = sum(s.increments.last(half));
        const double scale = std::sqrt(static_cast<double>(m / 2) * h);
        s.xi_first = s1 / scale;
        s.xi_second = s2 / scale;
        s.xi = (s1 + s2) / std::sqrt(static_cast<double>(m) * h);
    } else {
        s.xi = sum(s.increments) / std::sqrt(static_cast<double>(m) * h);
    }
    return s;
}

}  // namespace hhsplit
