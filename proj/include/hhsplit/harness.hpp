#pragma once

#include "hhsplit/model.hpp"
#include "hhsplit/oracle.hpp"
#include "hhsplit/schemes.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hhsplit {

/// Ordinary least-squares line through (log2 dt, log2 error).
struct SlopeFit {
    std::string label;
    double slope = 0.0;
    double intercept = 0.0;
    /// Root-mean-square residual of the fit in log2 units.
    double residual = 0.0;
    int n_levels = 0;
};

/// Fits only the finite points; slope is NaN with fewer than `min_levels` of them.
SlopeFit fit_log2_slope(const std::vector<double>& dt, const std::vector<double>& error,
                        int min_levels = 4);

// ---------------------------------------------------------------------------
// Strong convergence

struct ConvergenceConfig {
    ModelSpec<double> spec;
    State<double> x0;
    double t_end = 1.0;
    std::vector<double> dt_list;
    std::vector<SchemeKind> schemes;
    std::int64_t n_paths = 256;
    ReferenceConfig reference;
    std::uint64_t seed = 0;
    int threads = 1;
    ChiRealization chi = ChiRealization::scaled_increment;
};

struct RmseCell {
    SchemeKind scheme;
    double dt = 0.0;
    /// NaN when any path exploded.
    double rmse = 0.0;
    std::int64_t n_paths = 0;
    std::int64_t n_exploded = 0;
};

struct ConvergenceReport {
    std::vector<RmseCell> cells;
    std::vector<SlopeFit> fits;  // one per scheme, label = scheme name

    const SlopeFit& fit(SchemeKind k) const;
    double rmse(SchemeKind k, double dt) const;
};

/// RMSE(dt) = max_i sqrt(mean_m |X_ref(t_i) - X_dt(t_i)|^2) over the grid of
/// each dt, with every path coupled to the reference through one fine
/// Brownian path.
ConvergenceReport run_convergence(const ConvergenceConfig& cfg);

// ---------------------------------------------------------------------------
// One-step consistency

struct StartRegion {
    double v_min = -5.0;
    double v_max = 5.0;
    double u_min = 0.0;
    double u_max = 1.0;
    double z_min = -1.0;
    double z_max = 1.0;
};

/// Deterministic uniform start state number `index` in the region.
State<double> sample_start(const ModelSpec<double>& spec, const StartRegion& region, std::uint64_t seed,
                           std::int64_t index);

struct ConsistencyConfig {
    ModelSpec<double> spec;
    SchemeKind scheme = SchemeKind::lt2;
    StartRegion starts;
    std::vector<double> dt_list;
    std::int64_t n_paths = 10000;
    double truncation_radius = 50.0;
    ReferenceConfig reference{std::nullopt, 0x1.0p-18};
    std::uint64_t seed = 0;
    int threads = 1;
    ChiRealization chi = ChiRealization::weighted_path;
};

struct ConsistencyLevel {
    double dt = 0.0;
    double rms_error = 0.0;  // full state
    double rms_error_v = 0.0;
    double rms_error_u = 0.0;
    std::int64_t n_kept = 0;
    std::int64_t n_discarded = 0;
};

struct ConsistencyReport {
    std::vector<ConsistencyLevel> levels;
    SlopeFit fit;    // full state
    SlopeFit fit_v;  // V component
    SlopeFit fit_u;  // gating components
    double discard_fraction = 0.0;
};

ConsistencyReport run_consistency(const ConsistencyConfig& cfg);

// ---------------------------------------------------------------------------
// Invariant density

struct DensityReport {
    std::vector<double> edges;        // bins + 1 edges
    std::vector<double> frequencies;  // sums to one
    std::int64_t n_samples = 0;
    /// Samples left/right of the edges; counted into the outer bins.
    std::int64_t n_below = 0;
    std::int64_t n_above = 0;
    bool exploded = false;
    double exploded_at_time = 0.0;
    /// KS distance to the reference report, when one was supplied.
    std::optional<double> ks;
};

struct DensityConfig {
    ModelSpec<double> spec;
    SchemeKind scheme = SchemeKind::strang;
    State<double> x0;
    double dt = 1e-3;
    double t_end = 200.0;
    /// Negative: 20% of t_end.
    double burn_in = -1.0;
    int bins = 200;
    std::uint64_t seed = 0;
    /// Base grid of the Brownian path. Runs sharing seed and base_dt see one realization. Zero: dt.
    double base_dt = 0.0;
    /// Spacing of recorded V samples (multiple of dt). Zero: dt.
    double sample_dt = 0.0;
};

/// Histogram of V after burn-in; bins span the run's own range unless a
/// reference is given, in which case the reference edges are used and the KS
/// distance between the two distributions is reported.
DensityReport run_density(const DensityConfig& cfg, const DensityReport* reference = nullptr);

/// KS distance of two histograms defined on the same edges.
double ks_distance(const DensityReport& a, const DensityReport& b);

// ---------------------------------------------------------------------------
// Escape from the unit cube

struct EscapeConfig {
    ModelSpec<double> spec;
    SchemeKind scheme = SchemeKind::em;
    double dt = 1e-2;
    std::int64_t n_steps = 100;
    std::int64_t n_paths = 100;
    StartRegion starts;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct EscapeReport {
    std::int64_t total_steps = 0;
    std::int64_t escape_steps = 0;
    std::int64_t paths_with_escape = 0;
    std::int64_t n_exploded = 0;
    /// Mean step index of the first escape over escaping paths (NaN if none).
    double mean_first_escape = 0.0;
    std::int64_t min_first_escape = -1;

    double escape_rate() const {
        return total_steps ? static_cast<double>(escape_steps) / static_cast<double>(total_steps) : 0.0;
    }
};

EscapeReport run_escape(const EscapeConfig& cfg);

// ---------------------------------------------------------------------------
// Discrete Lyapunov condition for L(x) = 1 + |v|

struct LyapunovConstants {
    double c_a = 0.0;      // inf over the cube of -a(u)
    double c_b = 0.0;      // sup over the cube of |b(u)|
    double c_sigma = 0.0;  // sup over the cube of |Sigma(u)|
};

/// Constants estimated on a regular grid of the cube (points_per_axis^d nodes).
LyapunovConstants lyapunov_constants(const ModelSpec<double>& spec, int points_per_axis = 21);

struct LyapunovConfig {
    ModelSpec<double> spec;
    SchemeKind scheme = SchemeKind::lt2;
    std::vector<double> v_probes;
    double dt = 1e-2;
    std::int64_t n_mc = 10000;
    std::uint64_t seed = 0;
    /// Gates of the probe states; unset: U_inf(v) per probe.
    std::optional<GateVector<double>> u_probe;
};

struct LyapunovProbe {
    double v = 0.0;
    double lhs = 0.0;  // E[1 + |V'|]
    double std_error = 0.0;
    double bound = 0.0;  // e^{-C_a dt} (1 + |v|) + C_2
    bool holds() const { return lhs <= bound + 3.0 * std_error; }
};

struct LyapunovReport {
    LyapunovConstants constants;
    double c2 = 0.0;
    std::vector<LyapunovProbe> probes;
};

LyapunovReport run_lyapunov(const LyapunovConfig& cfg);

// ---------------------------------------------------------------------------
// Moment stability

struct MomentConfig {
    ModelSpec<double> spec;
    SchemeKind scheme = SchemeKind::strang;
    State<double> x0;
    std::vector<double> p_list{1.0};
    double dt = 1e-3;
    std::vector<double> t_end_ladder{1.0, 2.0, 4.0};
    std::int64_t n_paths = 100;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct MomentRow {
    double p = 1.0;
    double t_end = 0.0;
    /// Plug-in estimate of E[max_t |V_t|^{2p}]; NaN when a path exploded.
    double value = 0.0;
    std::int64_t n_exploded = 0;
    /// Growth from the previous horizon exceeded the ratio of horizons.
    bool superlinear_growth = false;
};

struct MomentReport {
    std::vector<MomentRow> rows;
    bool exploded() const;
};

MomentReport run_moment_check(const MomentConfig& cfg);

// ---------------------------------------------------------------------------
// Path comparison on one Brownian realization

struct CompareConfig {
    ModelSpec<double> spec;
    std::vector<SchemeKind> schemes;
    std::vector<double> dt_list;
    std::vector<State<double>> x0_list;
    double t_end = 20.0;
    ReferenceConfig reference{std::nullopt, 1e-5};
    std::uint64_t seed = 0;
    int threads = 1;
};

struct ComparedPath {
    SchemeKind scheme;  // the reference scheme for reference rows
    bool is_reference = false;
    double dt = 0.0;
    std::size_t x0_index = 0;
    std::vector<double> v;  // V at t_i = i dt up to explosion
    bool exploded = false;
    double exploded_at_time = 0.0;
    /// sup over the common grid of |V - V_ref|; NaN after explosion.
    double sup_deviation = 0.0;
};

struct CompareReport {
    std::vector<ComparedPath> paths;

    const ComparedPath& find(SchemeKind k, double dt, std::size_t x0_index) const;
};

CompareReport run_path_compare(const CompareConfig& cfg);

}  // namespace hhsplit
