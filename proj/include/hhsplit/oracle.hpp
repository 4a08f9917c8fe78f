#pragma once

#include "hhsplit/model.hpp"
#include "hhsplit/noise.hpp"
#include "hhsplit/schemes.hpp"

#include <cstdint>
#include <optional>

namespace hhsplit {

/// Exact strong solution of dY = (a Y + c) dt + s dW over dt given the
/// standardized draw xi of the stochastic integral. Written out from the
/// closed form, independently of linear_transition.
double exact_linear_transition(double a, double c, double s, double dt, double y0, double xi);

/// Closed-form variance of int_0^dt e^{a (dt - r)} dW_r.
double ito_integral_variance(double a, double dt);

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Brute-force estimate of Var(int_0^dt e^{a (dt - r)} dW_r) from midpoint
/// Riemann-Ito sums over n_sub sub-intervals and n_samples independent paths.
MonteCarloEstimate ito_integral_variance_mc(double a, double dt, std::int64_t n_sub,
                                            std::int64_t n_samples, std::uint64_t seed);

struct ReferenceConfig {
    /// Unset: trem for stochastic models, strang for deterministic ones.
    std::optional<SchemeKind> scheme;
    double ref_dt = 0x1.0p-15;
};

SchemeKind reference_scheme(const ModelSpec<double>& spec, const ReferenceConfig& cfg);

/// Fine-grid trajectory on the shared Brownian path. Throws ReferenceExplosion
/// when the reference stops being finite.
Trajectory<double> reference_trajectory(const ModelSpec<double>& spec, const State<double>& x0,
                                        const ReferenceConfig& cfg, const PathNoise* noise, double t_end);

/// States of a fine trajectory at the grid of a coarser step dt.
std::vector<State<double>> downsample(const Trajectory<double>& fine, double dt);

}  // namespace hhsplit
