#include "hhsplit/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hhsplit {

double ito_integral_variance(double a, double dt) {
    if (dt == 0.0) return 0.0;
    if (a == 0.0) return dt;
    return (std::exp(2.0 * a * dt) - 1.0) / (2.0 * a);
}

double exact_linear_transition(double a, double c, double s, double dt, double y0, double xi) {
    if (dt == 0.0) return y0;
    const double decay = std::exp(a * dt);
    const double forced = a == 0.0 ? c * dt : c / a * (decay - 1.0);
    return decay * y0 + forced + std::abs(s) * std::sqrt(ito_integral_variance(a, dt)) * xi;
}

MonteCarloEstimate ito_integral_variance_mc(double a, double dt, std::int64_t n_sub,
                                            std::int64_t n_samples, std::uint64_t seed) {
    if (n_sub < 1 || n_samples < 2) throw std::invalid_argument("need n_sub >= 1 and n_samples >= 2");
    if (dt == 0.0) return {0.0, 0.0};
    const double h = dt / static_cast<double>(n_sub);
    const double sqrt_h = std::sqrt(h);
    std::vector<double> weights(static_cast<std::size_t>(n_sub));
    for (std::int64_t k = 0; k < n_sub; ++k)
        weights[static_cast<std::size_t>(k)] = std::exp(a * (dt - (static_cast<double>(k) + 0.5) * h));

    std::vector<double> draws(static_cast<std::size_t>(n_sub));
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t m = 0; m < n_samples; ++m) {
        CounterStream stream(seed, StreamTag::monte_carlo, static_cast<std::uint64_t>(m));
        stream.fill_normal(0, draws);
        double integral = 0.0;
        for (std::size_t k = 0; k < draws.size(); ++k) integral += weights[k] * sqrt_h * draws[k];
        const double y = integral * integral;
        sum += y;
        sum_sq += y * y;
    }
    const double n = static_cast<double>(n_samples);
    const double mean = sum / n;
    const double var = (sum_sq - n * mean * mean) / (n - 1.0);
    return {mean, std::sqrt(std::max(var, 0.0) / n)};
}

SchemeKind reference_scheme(const ModelSpec<double>& spec, const ReferenceConfig& cfg) {
    if (cfg.scheme) return *cfg.scheme;
    return spec.is_deterministic() ? SchemeKind::strang : SchemeKind::trem;
}

Trajectory<double> reference_trajectory(const ModelSpec<double>& spec, const State<double>& x0,
                                        const ReferenceConfig& cfg, const PathNoise* noise, double t_end) {
    if (noise && aligned_ratio(cfg.ref_dt, noise->plan().base_dt) != 1)
        throw std::invalid_argument("the reference step must equal the base step of the noise plan");
    auto traj = simulate_path(reference_scheme(spec, cfg), spec, x0, cfg.ref_dt, t_end, noise);
    if (traj.exploded())
        throw ReferenceExplosion("reference trajectory (" +
                                 std::string(scheme_name(reference_scheme(spec, cfg))) +
                                 ") became non-finite at step " + std::to_string(*traj.exploded_at));
    return traj;
}

std::vector<State<double>> downsample(const Trajectory<double>& fine, double dt) {
    const std::int64_t stride = aligned_ratio(dt, fine.dt);
    std::vector<State<double>> out;
    for (std::size_t i = 0; i < fine.states.size(); i += static_cast<std::size_t>(stride))
        out.push_back(fine.states[i]);
    return out;
}

}  // namespace hhsplit
