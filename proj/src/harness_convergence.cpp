#include "hhsplit/harness.hpp"
#include "hhsplit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hhsplit {

SlopeFit fit_log2_slope(const std::vector<double>& dt, const std::vector<double>& error, int min_levels) {
    if (dt.size() != error.size()) throw std::invalid_argument("fit_log2_slope: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < dt.size(); ++i) {
        if (dt[i] > 0 && error[i] > 0 && std::isfinite(error[i])) {
            xs.push_back(std::log2(dt[i]));
            ys.push_back(std::log2(error[i]));
        }
    }
    SlopeFit fit;
    fit.n_levels = static_cast<int>(xs.size());
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    if (fit.n_levels < std::max(min_levels, 2)) {
        fit.slope = fit.intercept = fit.residual = nan;
        return fit;
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / n);
    return fit;
}

const SlopeFit& ConvergenceReport::fit(SchemeKind k) const {
    for (const auto& f : fits)
        if (f.label == scheme_name(k)) return f;
    throw std::out_of_range("no fit for scheme " + std::string(scheme_name(k)));
}

double ConvergenceReport::rmse(SchemeKind k, double dt) const {
    for (const auto& c : cells)
        if (c.scheme == k && std::abs(c.dt - dt) <= 1e-12 * dt) return c.rmse;
    throw std::out_of_range("no RMSE cell for the requested scheme and step");
}

namespace {

struct CellAccumulator {
    SchemeKind scheme;
    double dt;
    std::int64_t n_steps;
    std::int64_t stride;  // reference steps per scheme step
};

struct PathErrors {
    std::vector<std::vector<double>> sq;  // per cell, per grid point
    std::vector<char> exploded;
};

void validate_convergence(const ConvergenceConfig& cfg) {
    validate(cfg.spec);
    check_state(cfg.spec, cfg.x0);
    if (cfg.n_paths < 2) throw std::invalid_argument("convergence study needs at least two paths");
    if (cfg.dt_list.empty() || cfg.schemes.empty())
        throw std::invalid_argument("convergence study needs step sizes and schemes");
    for (double dt : cfg.dt_list) {
        aligned_ratio(dt, cfg.reference.ref_dt);
        aligned_ratio(cfg.t_end, dt);
    }
}

}  // namespace

ConvergenceReport run_convergence(const ConvergenceConfig& cfg) {
    validate_convergence(cfg);
    const auto& spec = cfg.spec;
    const bool stochastic = !spec.is_deterministic();
    const NoisePlan plan{cfg.seed, cfg.n_paths, cfg.t_end, cfg.reference.ref_dt};

    std::vector<CellAccumulator> cells;
    for (SchemeKind k : cfg.schemes)
        for (double dt : cfg.dt_list)
            cells.push_back({k, dt, aligned_ratio(cfg.t_end, dt), aligned_ratio(dt, cfg.reference.ref_dt)});

    std::vector<std::vector<double>> sum_sq(cells.size());
    std::vector<std::int64_t> exploded(cells.size(), 0);
    for (std::size_t c = 0; c < cells.size(); ++c)
        sum_sq[c].assign(static_cast<std::size_t>(cells[c].n_steps + 1), 0.0);

    auto run_path = [&](std::int64_t path) {
        std::optional<PathNoise> noise;
        if (stochastic) noise.emplace(plan, path, true);
        const PathNoise* np = noise ? &*noise : nullptr;
        const auto ref = reference_trajectory(spec, cfg.x0, cfg.reference, np, cfg.t_end);

        PathErrors out;
        out.sq.resize(cells.size());
        out.exploded.assign(cells.size(), 0);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& cell = cells[c];
            auto& sq = out.sq[c];
            sq.assign(static_cast<std::size_t>(cell.n_steps + 1), 0.0);
            const auto outcome = simulate(
                cell.scheme, spec, cfg.x0, cell.dt, cell.n_steps, np,
                [&](std::int64_t i, const State<double>& s) {
                    const auto& r = ref.states[static_cast<std::size_t>(i * cell.stride)];
                    sq[static_cast<std::size_t>(i)] = (s.flat() - r.flat()).squaredNorm();
                },
                {cfg.chi});
            out.exploded[c] = outcome.exploded_at.has_value();
        }
        return out;
    };

    // Deterministic models give identical paths; simulate one and weight it.
    const std::int64_t n_distinct = stochastic ? cfg.n_paths : 1;
    const double weight = stochastic ? 1.0 : static_cast<double>(cfg.n_paths);
    const std::int64_t batch = std::max<std::int64_t>(16, 4 * static_cast<std::int64_t>(cfg.threads));
    std::vector<PathErrors> results;
    for (std::int64_t first = 0; first < n_distinct; first += batch) {
        const std::int64_t count = std::min(batch, n_distinct - first);
        results.assign(static_cast<std::size_t>(count), {});
        parallel_for(count, cfg.threads,
                     [&](std::int64_t j) { results[static_cast<std::size_t>(j)] = run_path(first + j); });
        for (const auto& r : results) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (r.exploded[c]) {
                    exploded[c] += static_cast<std::int64_t>(weight);
                    continue;
                }
                for (std::size_t i = 0; i < sum_sq[c].size(); ++i) sum_sq[c][i] += weight * r.sq[c][i];
            }
        }
    }

    ConvergenceReport report;
    const double m = static_cast<double>(cfg.n_paths);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        RmseCell cell{cells[c].scheme, cells[c].dt, 0.0, cfg.n_paths, exploded[c]};
        if (exploded[c] > 0) {
            cell.rmse = std::numeric_limits<double>::quiet_NaN();
        } else {
            double worst = 0.0;
            for (double s : sum_sq[c]) worst = std::max(worst, s / m);
            cell.rmse = std::sqrt(worst);
        }
        report.cells.push_back(cell);
    }
    for (SchemeKind k : cfg.schemes) {
        std::vector<double> dts, errs;
        for (const auto& c : report.cells)
            if (c.scheme == k) {
                dts.push_back(c.dt);
                errs.push_back(c.rmse);
            }
        auto fit = fit_log2_slope(dts, errs);
        fit.label = std::string(scheme_name(k));
        report.fits.push_back(fit);
    }
    return report;
}

}  // namespace hhsplit
