#include "hhsplit/harness.hpp"
#include "hhsplit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hhsplit {

State<double> sample_start(const ModelSpec<double>& spec, const StartRegion& region, std::uint64_t seed,
                           std::int64_t index) {
    const CounterStream stream(seed, StreamTag::start_state, static_cast<std::uint64_t>(index));
    auto lerp = [](double lo, double hi, double t) { return lo + (hi - lo) * t; };
    State<double> x;
    x.v = lerp(region.v_min, region.v_max, stream.uniform(0));
    x.u.resize(spec.dim());
    for (int l = 0; l < spec.dim(); ++l)
        x.u(l) = lerp(region.u_min, region.u_max, stream.uniform(1 + static_cast<std::uint64_t>(l)));
    if (spec.is_ou())
        x.z = lerp(region.z_min, region.z_max, stream.uniform(1 + static_cast<std::uint64_t>(spec.dim())));
    return x;
}

namespace {

struct LevelSample {
    double sq_v = 0.0;
    double sq_u = 0.0;
    double sq_z = 0.0;
    bool kept = false;
};

}  // namespace

ConsistencyReport run_consistency(const ConsistencyConfig& cfg) {
    const auto& spec = cfg.spec;
    validate(spec);
    if (cfg.dt_list.empty()) throw std::invalid_argument("consistency study needs step sizes");
    if (cfg.n_paths < 1) throw std::invalid_argument("consistency study needs paths");
    const double r = cfg.truncation_radius;
    if (!(r > std::max(std::abs(cfg.starts.v_min), std::abs(cfg.starts.v_max))))
        throw std::invalid_argument("truncation radius must exceed every sampled |V|");

    const double ref_dt = cfg.reference.ref_dt;
    const double max_dt = *std::max_element(cfg.dt_list.begin(), cfg.dt_list.end());
    std::vector<std::int64_t> ref_steps;
    for (double dt : cfg.dt_list) ref_steps.push_back(aligned_ratio(dt, ref_dt));
    const std::int64_t n_ref = aligned_ratio(max_dt, ref_dt);
    const bool stochastic = !spec.is_deterministic();
    const NoisePlan plan{cfg.seed, cfg.n_paths, max_dt, ref_dt};
    const SchemeKind ref_kind = reference_scheme(spec, cfg.reference);
    const std::size_t n_levels = cfg.dt_list.size();

    // Every level of one path starts from the same state and reads a prefix of
    // the same fine Brownian path, so a single reference run serves all levels.
    auto run_path = [&](std::int64_t path) {
        const State<double> x0 = sample_start(spec, cfg.starts, cfg.seed, path);
        std::optional<PathNoise> noise;
        if (stochastic) noise.emplace(plan, path, true);
        const PathNoise* np = noise ? &*noise : nullptr;

        std::vector<State<double>> ref_at(n_levels);
        std::vector<char> ref_escaped(n_levels, 0);
        double max_abs_v = std::abs(x0.v);
        const auto outcome = simulate(ref_kind, spec, x0, ref_dt, n_ref, np,
                                      [&](std::int64_t i, const State<double>& s) {
                                          max_abs_v = std::max(max_abs_v, std::abs(s.v));
                                          for (std::size_t j = 0; j < n_levels; ++j)
                                              if (ref_steps[j] == i) {
                                                  ref_at[j] = s;
                                                  ref_escaped[j] = !(max_abs_v < r);
                                              }
                                      });
        if (outcome.exploded_at) throw ReferenceExplosion("consistency reference became non-finite");

        std::vector<LevelSample> out(n_levels);
        std::vector<double> scratch;
        for (std::size_t j = 0; j < n_levels; ++j) {
            const double dt = cfg.dt_list[j];
            StepContext<double> ctx{spec, dt, {}, cfg.chi};
            if (stochastic) ctx.noise = step_noise(*np, 0, dt, needs_half_steps(cfg.scheme, spec), scratch);
            const State<double> y = step(cfg.scheme, ctx, x0);
            if (ref_escaped[j] || !y.all_finite() || !(std::abs(y.v) < r)) continue;
            out[j].kept = true;
            const auto diff = (y.flat() - ref_at[j].flat()).eval();
            out[j].sq_v = diff(0) * diff(0);
            out[j].sq_u = diff.segment(1, spec.dim()).squaredNorm();
            if (spec.is_ou()) out[j].sq_z = diff(1 + spec.dim()) * diff(1 + spec.dim());
        }
        return out;
    };

    std::vector<double> sum_v(n_levels, 0.0), sum_u(n_levels, 0.0), sum_full(n_levels, 0.0);
    std::vector<std::int64_t> kept(n_levels, 0);
    const std::int64_t batch = std::max<std::int64_t>(64, 16 * static_cast<std::int64_t>(cfg.threads));
    std::vector<std::vector<LevelSample>> results;
    for (std::int64_t first = 0; first < cfg.n_paths; first += batch) {
        const std::int64_t count = std::min(batch, cfg.n_paths - first);
        results.assign(static_cast<std::size_t>(count), {});
        parallel_for(count, cfg.threads,
                     [&](std::int64_t k) { results[static_cast<std::size_t>(k)] = run_path(first + k); });
        for (const auto& res : results)
            for (std::size_t j = 0; j < n_levels; ++j) {
                if (!res[j].kept) continue;
                ++kept[j];
                sum_v[j] += res[j].sq_v;
                sum_u[j] += res[j].sq_u;
                sum_full[j] += res[j].sq_v + res[j].sq_u + res[j].sq_z;
            }
    }

    ConsistencyReport report;
    std::int64_t discarded_total = 0;
    std::vector<double> e_full, e_v, e_u;
    for (std::size_t j = 0; j < n_levels; ++j) {
        if (kept[j] == 0)
            throw std::runtime_error("every consistency path was discarded; increase the truncation radius");
        ConsistencyLevel level;
        level.dt = cfg.dt_list[j];
        level.n_kept = kept[j];
        level.n_discarded = cfg.n_paths - kept[j];
        const double n = static_cast<double>(kept[j]);
        level.rms_error_v = std::sqrt(sum_v[j] / n);
        level.rms_error_u = std::sqrt(sum_u[j] / n);
        level.rms_error = std::sqrt(sum_full[j] / n);
        discarded_total += level.n_discarded;
        e_full.push_back(level.rms_error);
        e_v.push_back(level.rms_error_v);
        e_u.push_back(level.rms_error_u);
        report.levels.push_back(level);
    }
    report.fit = fit_log2_slope(cfg.dt_list, e_full);
    report.fit.label = "state";
    report.fit_v = fit_log2_slope(cfg.dt_list, e_v);
    report.fit_v.label = "v";
    report.fit_u = fit_log2_slope(cfg.dt_list, e_u);
    report.fit_u.label = "u";
    report.discard_fraction =
        static_cast<double>(discarded_total) / static_cast<double>(cfg.n_paths * static_cast<std::int64_t>(n_levels));
    return report;
}

}  // namespace hhsplit
