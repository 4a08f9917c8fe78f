#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace hhsplit {

/// Philox4x64-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x64 {
    using Counter = std::array<std::uint64_t, 4>;
    using Key = std::array<std::uint64_t, 2>;
    static Counter block(Counter ctr, Key key);
};

/// Stream tags separate independent uses of one master seed.
enum class StreamTag : std::uint64_t {
    brownian = 0x42726f776e69616eULL,
    start_state = 0x5374617274537461ULL,
    monte_carlo = 0x4d6f6e7465436172ULL,
};

/// Random-access standard normal and uniform variates addressed by
/// (seed, tag, substream, index). Pure: no state is mutated by draws.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, StreamTag tag, std::uint64_t substream);

    double normal(std::uint64_t index) const;
    /// Uniform on the open interval (0, 1).
    double uniform(std::uint64_t index) const;
    void fill_normal(std::uint64_t first, std::span<double> out) const;

private:
    Philox4x64::Counter counter(std::uint64_t block_index) const;

    Philox4x64::Key key_;
    std::uint64_t substream_;
};

struct NoisePlan {
    std::uint64_t master_seed = 0;
    std::int64_t n_paths = 1;
    double t_end = 1.0;
    double base_dt = 1e-3;

    void validate() const;
    std::int64_t n_base_steps() const;
    /// Number of base increments per step of size dt; throws if dt is not a
    /// positive integer multiple of base_dt.
    std::int64_t steps_per(double dt) const;
};

/// Integer ratio of a step size to a base grid, throwing std::invalid_argument
/// when they are not aligned to 1e-9 relative accuracy.
std::int64_t aligned_ratio(double dt, double base_dt);

enum class Window { full, first_half, second_half };

/// Brownian increments W((k+1) h) - W(k h) on the base grid h = base_dt of one path.
class PathNoise {
public:
    PathNoise(const NoisePlan& plan, std::int64_t path_index, bool materialize = true);

    const NoisePlan& plan() const { return plan_; }
    std::int64_t path_index() const { return path_index_; }
    std::int64_t size() const { return n_steps_; }
    bool materialized() const { return !increments_.empty() || n_steps_ == 0; }

    double increment(std::int64_t k) const;
    /// Materialized increments; empty when the noise is generated on demand.
    std::span<const double> increments() const { return increments_; }
    /// Increments [first, first + count), copied into scratch only when not materialized.
    std::span<const double> window(std::int64_t first, std::int64_t count,
                                   std::vector<double>& scratch) const;

private:
    NoisePlan plan_;
    std::int64_t path_index_;
    std::int64_t n_steps_;
    double scale_;
    CounterStream stream_;
    std::vector<double> increments_;
};

PathNoise generate_path_noise(const NoisePlan& plan, std::int64_t path_index);

/// Standardized increment (W(b) - W(a)) / sqrt(b - a) over step step_index of
/// size dt, or over its first or second half.
double xi_at(const PathNoise& noise, std::int64_t step_index, double dt, Window half = Window::full);

/// Everything a one-step map needs from the Brownian path on [t_{i-1}, t_i].
struct StepNoise {
    double xi = 0.0;
    double xi_first = 0.0;
    double xi_second = 0.0;
    /// Base-grid increments covering the step (empty for noise-free steps).
    std::span<const double> increments;
    double base_dt = 0.0;

    double dw(double dt) const;
};

/// Collects the step's noise. Half-step values require an even number of
/// base increments per step when need_halves is set.
StepNoise step_noise(const PathNoise& noise, std::int64_t step_index, double dt, bool need_halves,
                     std::vector<double>& scratch);

}  // namespace hhsplit
