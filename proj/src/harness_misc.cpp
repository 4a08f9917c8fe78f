#include "hhsplit/harness.hpp"
#include "hhsplit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hhsplit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool escaped(const GateVector<double>& u) {
    return (u.array() < -1e-12).any() || (u.array() > 1.0 + 1e-12).any();
}

}  // namespace

// ---------------------------------------------------------------------------

EscapeReport run_escape(const EscapeConfig& cfg) {
    validate(cfg.spec);
    if (cfg.n_paths < 1 || cfg.n_steps < 1) throw std::invalid_argument("escape study needs paths and steps");
    const bool stochastic = !cfg.spec.is_deterministic();
    const NoisePlan plan{cfg.seed, cfg.n_paths, cfg.dt * static_cast<double>(cfg.n_steps), cfg.dt};

    struct PathResult {
        std::int64_t steps = 0;
        std::int64_t escapes = 0;
        std::int64_t first = -1;
        bool exploded = false;
    };
    std::vector<PathResult> results(static_cast<std::size_t>(cfg.n_paths));
    parallel_for(cfg.n_paths, cfg.threads, [&](std::int64_t p) {
        const State<double> x0 = sample_start(cfg.spec, cfg.starts, cfg.seed, p);
        std::optional<PathNoise> noise;
        if (stochastic) noise.emplace(plan, p, true);
        PathResult r;
        const auto outcome = simulate(cfg.scheme, cfg.spec, x0, cfg.dt, cfg.n_steps, noise ? &*noise : nullptr,
                                      [&](std::int64_t i, const State<double>& s) {
                                          if (i == 0 || !s.all_finite()) return;
                                          if (escaped(s.u)) {
                                              ++r.escapes;
                                              if (r.first < 0) r.first = i;
                                          }
                                      });
        r.steps = outcome.exploded_at ? *outcome.exploded_at - 1 : outcome.steps_done;
        r.exploded = outcome.exploded_at.has_value();
        results[static_cast<std::size_t>(p)] = r;
    });

    EscapeReport report;
    double first_sum = 0.0;
    for (const auto& r : results) {
        report.total_steps += r.steps;
        report.escape_steps += r.escapes;
        report.n_exploded += r.exploded;
        if (r.first >= 0) {
            ++report.paths_with_escape;
            first_sum += static_cast<double>(r.first);
            if (report.min_first_escape < 0 || r.first < report.min_first_escape) report.min_first_escape = r.first;
        }
    }
    report.mean_first_escape =
        report.paths_with_escape ? first_sum / static_cast<double>(report.paths_with_escape) : kNaN;
    return report;
}

// ---------------------------------------------------------------------------

LyapunovConstants lyapunov_constants(const ModelSpec<double>& spec, int points_per_axis) {
    validate(spec);
    const int d = spec.dim();
    // Keep the grid below ~2e6 nodes in high dimension.
    int n = std::max(points_per_axis, 2);
    while (n > 2 && std::pow(static_cast<double>(n), d) > 2e6) --n;

    LyapunovConstants c;
    c.c_a = std::numeric_limits<double>::infinity();
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    GateVector<double> u(d);
    for (;;) {
        for (int l = 0; l < d; ++l) u(l) = static_cast<double>(idx[static_cast<std::size_t>(l)]) / (n - 1);
        c.c_a = std::min(c.c_a, -spec.coefficients.a(u));
        c.c_b = std::max(c.c_b, std::abs(spec.coefficients.b(u)));
        c.c_sigma = std::max(c.c_sigma, std::abs(spec.v_diffusion(u)));
        int l = 0;
        while (l < d && ++idx[static_cast<std::size_t>(l)] == n) idx[static_cast<std::size_t>(l++)] = 0;
        if (l == d) break;
    }
    return c;
}

LyapunovReport run_lyapunov(const LyapunovConfig& cfg) {
    const auto& spec = cfg.spec;
    validate(spec);
    if (spec.is_ou()) throw std::invalid_argument("the Lyapunov check covers the Brownian and deterministic models");
    if (!is_splitting(cfg.scheme)) throw std::invalid_argument("the Lyapunov check applies to splitting schemes");
    if (cfg.dt < 0) throw std::invalid_argument("negative step size");
    if (cfg.n_mc < 2) throw std::invalid_argument("Lyapunov check needs at least two draws");
    if (cfg.u_probe && cfg.u_probe->size() != spec.dim()) throw std::invalid_argument("probe gate dimension mismatch");

    LyapunovReport report;
    report.constants = lyapunov_constants(spec);
    const auto& k = report.constants;
    report.c2 = 1.0 + k.c_b * cfg.dt + k.c_sigma * std::sqrt(cfg.dt) * std::sqrt(2.0 / std::numbers::pi);

    const bool stochastic = !spec.is_deterministic();
    for (std::size_t j = 0; j < cfg.v_probes.size(); ++j) {
        const double v = cfg.v_probes[j];
        if (!std::isfinite(v)) throw std::invalid_argument("Lyapunov probes must be finite");
        State<double> x;
        x.v = v;
        x.u = cfg.u_probe ? *cfg.u_probe : u_infinity(v, spec.coefficients);

        const CounterStream stream(cfg.seed, StreamTag::monte_carlo, j);
        const std::int64_t n = stochastic ? cfg.n_mc : 1;
        double sum = 0.0, sum_sq = 0.0;
        StepContext<double> ctx{spec, cfg.dt, {}, ChiRealization::scaled_increment};
        for (std::int64_t m = 0; m < n; ++m) {
            if (stochastic) {
                const auto i = static_cast<std::uint64_t>(m);
                ctx.noise.xi_first = stream.normal(2 * i);
                ctx.noise.xi_second = stream.normal(2 * i + 1);
                ctx.noise.xi = (ctx.noise.xi_first + ctx.noise.xi_second) / std::numbers::sqrt2;
            }
            const double l = 1.0 + std::abs(step(cfg.scheme, ctx, x).v);
            sum += l;
            sum_sq += l * l;
        }
        LyapunovProbe probe;
        probe.v = v;
        const double nn = static_cast<double>(n);
        probe.lhs = sum / nn;
        probe.std_error =
            n > 1 ? std::sqrt(std::max(sum_sq - nn * probe.lhs * probe.lhs, 0.0) / (nn - 1.0) / nn) : 0.0;
        probe.bound = std::exp(-k.c_a * cfg.dt) * (1.0 + std::abs(v)) + report.c2;
        report.probes.push_back(probe);
    }
    return report;
}

// ---------------------------------------------------------------------------

bool MomentReport::exploded() const {
    return std::any_of(rows.begin(), rows.end(), [](const MomentRow& r) { return r.n_exploded > 0; });
}

MomentReport run_moment_check(const MomentConfig& cfg) {
    validate(cfg.spec);
    check_state(cfg.spec, cfg.x0);
    if (cfg.p_list.empty() || cfg.t_end_ladder.empty()) throw std::invalid_argument("moment check needs p and horizons");
    for (double p : cfg.p_list)
        if (!(p >= 1.0)) throw std::invalid_argument("moment order p must be at least 1");
    if (!std::is_sorted(cfg.t_end_ladder.begin(), cfg.t_end_ladder.end()))
        throw std::invalid_argument("horizon ladder must be increasing");
    if (cfg.n_paths < 1) throw std::invalid_argument("moment check needs paths");

    const double t_max = cfg.t_end_ladder.back();
    std::vector<std::int64_t> marks;
    for (double t : cfg.t_end_ladder) marks.push_back(aligned_ratio(t, cfg.dt));
    const bool stochastic = !cfg.spec.is_deterministic();
    const NoisePlan plan{cfg.seed, cfg.n_paths, t_max, cfg.dt};
    const std::int64_t n_distinct = stochastic ? cfg.n_paths : 1;

    // Per path: running max of |V| at each horizon; NaN after explosion.
    std::vector<std::vector<double>> max_abs(static_cast<std::size_t>(n_distinct));
    parallel_for(n_distinct, cfg.threads, [&](std::int64_t p) {
        std::optional<PathNoise> noise;
        if (stochastic) noise.emplace(plan, p, true);
        auto& out = max_abs[static_cast<std::size_t>(p)];
        out.assign(marks.size(), kNaN);
        double running = 0.0;
        std::size_t next = 0;
        simulate(cfg.scheme, cfg.spec, cfg.x0, cfg.dt, marks.back(), noise ? &*noise : nullptr,
                 [&](std::int64_t i, const State<double>& s) {
                     if (!s.all_finite()) return;
                     running = std::max(running, std::abs(s.v));
                     while (next < marks.size() && marks[next] == i) out[next++] = running;
                 });
    });

    MomentReport report;
    for (double p : cfg.p_list) {
        for (std::size_t k = 0; k < marks.size(); ++k) {
            MomentRow row;
            row.p = p;
            row.t_end = cfg.t_end_ladder[k];
            double sum = 0.0;
            for (const auto& m : max_abs) {
                if (std::isnan(m[k]))
                    ++row.n_exploded;
                else
                    sum += std::pow(m[k], 2.0 * p);
            }
            if (!stochastic) row.n_exploded *= cfg.n_paths;
            row.value = row.n_exploded > 0 ? kNaN : sum / static_cast<double>(n_distinct);
            if (k > 0 && !report.rows.empty()) {
                const auto& prev = report.rows.back();
                row.superlinear_growth = std::isfinite(row.value) && std::isfinite(prev.value) && prev.value > 0 &&
                                         row.value / prev.value > row.t_end / prev.t_end;
            }
            report.rows.push_back(row);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------

const ComparedPath& CompareReport::find(SchemeKind k, double dt, std::size_t x0_index) const {
    for (const auto& p : paths)
        if (!p.is_reference && p.scheme == k && p.x0_index == x0_index && std::abs(p.dt - dt) <= 1e-12 * dt)
            return p;
    throw std::out_of_range("no compared path for the requested scheme, step and start");
}

CompareReport run_path_compare(const CompareConfig& cfg) {
    const auto& spec = cfg.spec;
    validate(spec);
    if (cfg.schemes.empty() || cfg.dt_list.empty() || cfg.x0_list.empty())
        throw std::invalid_argument("path comparison needs schemes, step sizes and start states");
    for (const auto& x0 : cfg.x0_list) check_state(spec, x0);
    const double ref_dt = cfg.reference.ref_dt;
    const double fine_dt = *std::min_element(cfg.dt_list.begin(), cfg.dt_list.end());
    const std::int64_t ref_stride = aligned_ratio(fine_dt, ref_dt);
    for (double dt : cfg.dt_list) {
        aligned_ratio(dt, fine_dt);
        aligned_ratio(cfg.t_end, dt);
    }
    const bool stochastic = !spec.is_deterministic();
    const NoisePlan plan{cfg.seed, 1, cfg.t_end, ref_dt};
    std::optional<PathNoise> noise;
    if (stochastic) noise.emplace(plan, 0, true);
    const PathNoise* np = noise ? &*noise : nullptr;
    const SchemeKind ref_kind = reference_scheme(spec, cfg.reference);

    const std::size_t n_x0 = cfg.x0_list.size();
    const std::size_t n_runs = cfg.schemes.size() * cfg.dt_list.size() * n_x0;
    std::vector<ComparedPath> rows(n_x0 + n_runs);

    // References: V on the finest compared grid.
    parallel_for(static_cast<std::int64_t>(n_x0), cfg.threads, [&](std::int64_t j) {
        auto& row = rows[static_cast<std::size_t>(j)];
        row.scheme = ref_kind;
        row.is_reference = true;
        row.dt = fine_dt;
        row.x0_index = static_cast<std::size_t>(j);
        const auto outcome = simulate(ref_kind, spec, cfg.x0_list[static_cast<std::size_t>(j)], ref_dt,
                                      aligned_ratio(cfg.t_end, ref_dt), np,
                                      [&](std::int64_t i, const State<double>& s) {
                                          if (i % ref_stride == 0) row.v.push_back(s.v);
                                      });
        if (outcome.exploded_at) {
            row.exploded = true;
            row.exploded_at_time = static_cast<double>(*outcome.exploded_at) * ref_dt;
        }
    });
    for (std::size_t j = 0; j < n_x0; ++j)
        if (rows[j].exploded)
            throw ReferenceExplosion("comparison reference (" + std::string(scheme_name(ref_kind)) +
                                     ") became non-finite for start " + std::to_string(j));

    parallel_for(static_cast<std::int64_t>(n_runs), cfg.threads, [&](std::int64_t r) {
        const auto q = static_cast<std::size_t>(r);
        const std::size_t j = q % n_x0;
        const std::size_t di = (q / n_x0) % cfg.dt_list.size();
        const std::size_t si = q / (n_x0 * cfg.dt_list.size());
        auto& row = rows[n_x0 + q];
        row.scheme = cfg.schemes[si];
        row.dt = cfg.dt_list[di];
        row.x0_index = j;
        const auto& ref = rows[j].v;
        const std::int64_t stride = aligned_ratio(row.dt, fine_dt);
        double sup = 0.0;
        const auto outcome = simulate(row.scheme, spec, cfg.x0_list[j], row.dt, aligned_ratio(cfg.t_end, row.dt), np,
                                      [&](std::int64_t i, const State<double>& s) {
                                          row.v.push_back(s.v);
                                          sup = std::max(sup, std::abs(s.v - ref[static_cast<std::size_t>(i * stride)]));
                                      });
        if (outcome.exploded_at) {
            row.exploded = true;
            row.exploded_at_time = static_cast<double>(*outcome.exploded_at) * row.dt;
            row.v.pop_back();
            row.sup_deviation = kNaN;
        } else {
            row.sup_deviation = sup;
        }
    });

    CompareReport report;
    report.paths = std::move(rows);
    return report;
}

}  // namespace hhsplit
