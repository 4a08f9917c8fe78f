#include "hhsplit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hhsplit {

namespace {

// Base increments above this count are generated on demand instead of stored.
constexpr std::int64_t kMaterializeLimit = std::int64_t{1} << 22;

std::vector<double> cdf_at_edges(const DensityReport& r) {
    const std::size_t bins = r.frequencies.size();
    const double n = static_cast<double>(r.n_samples);
    std::vector<double> cdf(bins + 1);
    cdf[0] = static_cast<double>(r.n_below) / n;
    double acc = 0.0;
    for (std::size_t k = 1; k < bins; ++k) {
        acc += r.frequencies[k - 1];
        cdf[k] = acc;
    }
    cdf[bins] = 1.0 - static_cast<double>(r.n_above) / n;
    return cdf;
}

}  // namespace

double ks_distance(const DensityReport& a, const DensityReport& b) {
    if (a.edges != b.edges) throw std::invalid_argument("ks_distance: histograms use different edges");
    if (a.n_samples == 0 || b.n_samples == 0) throw std::invalid_argument("ks_distance: empty histogram");
    const auto fa = cdf_at_edges(a);
    const auto fb = cdf_at_edges(b);
    double ks = 0.0;
    for (std::size_t k = 0; k < fa.size(); ++k) ks = std::max(ks, std::abs(fa[k] - fb[k]));
    return ks;
}

DensityReport run_density(const DensityConfig& cfg, const DensityReport* reference) {
    validate(cfg.spec);
    check_state(cfg.spec, cfg.x0);
    const double burn_in = cfg.burn_in < 0 ? 0.2 * cfg.t_end : cfg.burn_in;
    if (!(burn_in < cfg.t_end)) throw std::invalid_argument("burn-in must be shorter than the horizon");
    if (cfg.bins < 1) throw std::invalid_argument("density needs at least one bin");
    if (reference && (reference->exploded || reference->edges.size() < 2))
        throw std::invalid_argument("density reference holds no histogram");

    const double base_dt = cfg.base_dt > 0 ? cfg.base_dt : cfg.dt;
    const double sample_dt = cfg.sample_dt > 0 ? cfg.sample_dt : cfg.dt;
    const std::int64_t stride = aligned_ratio(sample_dt, cfg.dt);
    const std::int64_t n_steps = aligned_ratio(cfg.t_end, cfg.dt);
    const auto first_sample = static_cast<std::int64_t>(std::ceil(burn_in / cfg.dt - 1e-9));

    std::optional<PathNoise> noise;
    if (!cfg.spec.is_deterministic()) {
        const NoisePlan plan{cfg.seed, 1, cfg.t_end, base_dt};
        noise.emplace(plan, 0, plan.n_base_steps() <= kMaterializeLimit);
    }

    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>((n_steps - first_sample) / stride + 1));
    const auto outcome = simulate(cfg.scheme, cfg.spec, cfg.x0, cfg.dt, n_steps, noise ? &*noise : nullptr,
                                  [&](std::int64_t i, const State<double>& s) {
                                      if (i >= first_sample && i % stride == 0) samples.push_back(s.v);
                                  });

    DensityReport report;
    if (outcome.exploded_at) {
        report.exploded = true;
        report.exploded_at_time = static_cast<double>(*outcome.exploded_at) * cfg.dt;
        return report;
    }
    if (samples.empty()) throw std::invalid_argument("no samples recorded after burn-in");

    if (reference) {
        report.edges = reference->edges;
    } else {
        auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
        double a = *lo, b = *hi;
        if (a == b) {
            a -= 0.5;
            b += 0.5;
        }
        report.edges.resize(static_cast<std::size_t>(cfg.bins) + 1);
        for (int k = 0; k <= cfg.bins; ++k)
            report.edges[static_cast<std::size_t>(k)] = a + (b - a) * k / cfg.bins;
        report.edges.back() = b;
    }

    const std::size_t bins = report.edges.size() - 1;
    std::vector<std::int64_t> counts(bins, 0);
    const double lo = report.edges.front(), hi = report.edges.back();
    for (double v : samples) {
        if (v < lo) {
            ++report.n_below;
            ++counts.front();
            continue;
        }
        if (v > hi) {
            ++report.n_above;
            ++counts.back();
            continue;
        }
        auto it = std::upper_bound(report.edges.begin(), report.edges.end(), v);
        auto k = static_cast<std::size_t>(std::distance(report.edges.begin(), it));
        k = k == 0 ? 0 : std::min(k - 1, bins - 1);
        ++counts[k];
    }
    report.n_samples = static_cast<std::int64_t>(samples.size());
    report.frequencies.resize(bins);
    for (std::size_t k = 0; k < bins; ++k)
        report.frequencies[k] = static_cast<double>(counts[k]) / static_cast<double>(report.n_samples);
    if (reference) report.ks = ks_distance(report, *reference);
    return report;
}

}  // namespace hhsplit
