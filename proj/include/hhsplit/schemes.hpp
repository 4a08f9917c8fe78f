#pragma once

#include "hhsplit/flows.hpp"
#include "hhsplit/model.hpp"
#include "hhsplit/noise.hpp"

#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hhsplit {

enum class SchemeKind { lt1, lt2, strang, em, tem, dtem, trem, dtrem };

inline constexpr SchemeKind kAllSchemes[] = {SchemeKind::lt1, SchemeKind::lt2,  SchemeKind::strang,
                                             SchemeKind::em,  SchemeKind::tem,  SchemeKind::dtem,
                                             SchemeKind::trem, SchemeKind::dtrem};
inline constexpr SchemeKind kSplittingSchemes[] = {SchemeKind::lt1, SchemeKind::lt2, SchemeKind::strang};

constexpr bool is_splitting(SchemeKind k) {
    return k == SchemeKind::lt1 || k == SchemeKind::lt2 || k == SchemeKind::strang;
}

std::string_view scheme_name(SchemeKind k);
SchemeKind parse_scheme(std::string_view name);

/// How the Ito integral int e^{a(t_i - s)} dW_s of the exact V-flow is drawn.
///  - scaled_increment: nu(dt) * xi with xi the standardized Brownian increment
///    of the step (the classical implementation of the splitting schemes).
///  - weighted_path: nu(dt) times the normalized exponentially weighted sum of
///    the base-grid increments inside the step. Marginally N(0, nu^2) as well,
///    but pathwise close to the Ito integral of the underlying fine path.
///    Identical to scaled_increment when the step holds one base increment.
enum class ChiRealization { scaled_increment, weighted_path };

std::string_view chi_name(ChiRealization c);
ChiRealization parse_chi(std::string_view name);

template <typename Scalar>
struct StepContext {
    const ModelSpec<Scalar>& spec;
    Scalar dt;
    StepNoise noise{};
    ChiRealization chi = ChiRealization::scaled_increment;
};

namespace detail {

// Normalized sum_k w_k dW_k / sqrt(sum_k w_k^2 h) with w_k = exp(a (t_end - t_mid_k)).
inline double weighted_xi(double a, std::span<const double> inc, double h, double fallback) {
    if (inc.size() <= 1) return fallback;
    const double step = std::exp(a * h);
    double w = std::exp(0.5 * a * h);
    double s = 0.0, norm2 = 0.0;
    for (std::size_t k = inc.size(); k-- > 0;) {
        s += w * inc[k];
        norm2 += w * w;
        w *= step;
    }
    if (!(norm2 > 0) || !std::isfinite(norm2)) return fallback;
    return s / std::sqrt(norm2 * h);
}

template <typename Scalar>
Scalar chi_xi(const StepContext<Scalar>& ctx, Scalar a, Window w) {
    const StepNoise& n = ctx.noise;
    const double base = w == Window::full ? n.xi : (w == Window::first_half ? n.xi_first : n.xi_second);
    if (ctx.chi == ChiRealization::scaled_increment || n.increments.empty()) return Scalar(base);
    auto inc = n.increments;
    const std::size_t half = inc.size() / 2;
    if (w == Window::first_half) inc = inc.first(half);
    if (w == Window::second_half) inc = inc.last(half);
    return Scalar(weighted_xi(static_cast<double>(a), inc, n.base_dt, base));
}

// Exact flow of the V-subsystem with gates (and z) frozen.
template <typename Scalar>
Scalar psi_linear(const StepContext<Scalar>& ctx, Scalar dt, Scalar v, const GateVector<Scalar>& u,
                  const std::optional<Scalar>& z) {
    const auto& spec = ctx.spec;
    const Scalar a = spec.coefficients.a(u);
    Scalar c = spec.coefficients.b(u);
    if (spec.is_ou()) c += Scalar(spec.ou().theta) * (Scalar(spec.ou().mu) - *z);
    const Scalar s = spec.v_diffusion(u);
    const auto t = linear_transition(a, c, s, dt);
    const Scalar xi = t.stdev == Scalar(0) ? Scalar(0) : chi_xi(ctx, a, Window::full);
    return t.apply(v, xi);
}

// Exact OU flow of the auxiliary component over dt driven by the given window.
template <typename Scalar>
Scalar psi_z(const StepContext<Scalar>& ctx, Scalar dt, Scalar z, Window w) {
    const auto& p = ctx.spec.ou();
    const Scalar theta = Scalar(p.theta);
    const auto t = linear_transition(-theta, theta * Scalar(p.mu), Scalar(p.sigma), dt);
    return t.apply(z, chi_xi(ctx, -theta, w));
}

template <typename Scalar>
bool gates_in_cube(const GateVector<Scalar>& u) {
    return (u.array() >= Scalar(-1e-12)).all() && (u.array() <= Scalar(1 + 1e-12)).all();
}

}  // namespace detail

/// One step of a Lie-Trotter or Strang composition of the exact subflows.
template <typename Scalar>
State<Scalar> step_splitting(SchemeKind kind, const StepContext<Scalar>& ctx, const State<Scalar>& x) {
    const auto& spec = ctx.spec;
    const auto& coeffs = spec.coefficients;
    const Scalar dt = ctx.dt;
    const Scalar half = dt / Scalar(2);
    const bool ou = spec.is_ou();
    check_state(spec, x);
    if (dt < Scalar(0)) throw std::invalid_argument("negative step size");

    State<Scalar> y;
    switch (kind) {
        case SchemeKind::lt1: {
            y.u = psi_d(dt, coeffs.rates(x.v), x.u);
            if (ou) y.z = detail::psi_z(ctx, dt, *x.z, Window::full);
            y.v = detail::psi_linear(ctx, dt, x.v, y.u, y.z);
            break;
        }
        case SchemeKind::lt2: {
            y.v = detail::psi_linear(ctx, dt, x.v, x.u, x.z);
            y.u = psi_d(dt, coeffs.rates(y.v), x.u);
            if (ou) y.z = detail::psi_z(ctx, dt, *x.z, Window::full);
            break;
        }
        case SchemeKind::strang: {
            const GateVector<Scalar> u_half = psi_d(half, coeffs.rates(x.v), x.u);
            std::optional<Scalar> z_half;
            if (ou) z_half = detail::psi_z(ctx, half, *x.z, Window::first_half);
            y.v = detail::psi_linear(ctx, dt, x.v, u_half, z_half);
            y.u = psi_d(half, coeffs.rates(y.v), u_half);
            if (ou) y.z = detail::psi_z(ctx, half, *z_half, Window::second_half);
            break;
        }
        default:
            throw std::invalid_argument("step_splitting: not a splitting scheme");
    }
    assert(!x.all_finite() || !detail::gates_in_cube(x.u) || detail::gates_in_cube(y.u));
    return y;
}

/// One explicit Euler-Maruyama-type step on the flattened state.
///   em    X + dt b + g dW
///   tem   X + dt b / (1 + dt |b|) + g dW
///   dtem  X + (dt b + g dW) / (1 + dt |b| + |g dW|)
///   trem  X + dt b(P X) + g(X) dW
///   dtrem X + dt b(P X) + g(P X) dW
/// with P the Euclidean projection onto the ball of radius dt^{-1/2}.
/// Gates are not clamped; non-finite results signal blow-up.
template <typename Scalar>
State<Scalar> step_em_family(SchemeKind kind, const StepContext<Scalar>& ctx, const State<Scalar>& x) {
    using std::sqrt;
    const auto& spec = ctx.spec;
    check_state(spec, x);
    const Scalar dt = ctx.dt;
    if (dt < Scalar(0)) throw std::invalid_argument("negative step size");
    const Scalar dw = spec.is_deterministic() ? Scalar(0) : Scalar(ctx.noise.xi) * sqrt(dt);
    const int d = spec.dim();
    const bool has_z = x.z.has_value();
    const StateVector<Scalar> flat = x.flat();

    auto project = [&](const State<Scalar>& s) {
        if (dt == Scalar(0)) return s;
        const Scalar radius = Scalar(1) / sqrt(dt);
        const Scalar norm = s.flat().norm();
        if (!(norm > radius)) return s;
        return State<Scalar>::from_flat(s.flat() * (radius / norm), d, has_z);
    };

    StateVector<Scalar> next;
    switch (kind) {
        case SchemeKind::em:
            next = flat + dt * full_drift(spec, x) + full_diffusion(spec, x) * dw;
            break;
        case SchemeKind::tem: {
            const StateVector<Scalar> b = full_drift(spec, x);
            next = flat + (dt / (Scalar(1) + dt * b.norm())) * b + full_diffusion(spec, x) * dw;
            break;
        }
        case SchemeKind::dtem: {
            const StateVector<Scalar> b = full_drift(spec, x);
            const StateVector<Scalar> noise = full_diffusion(spec, x) * dw;
            next = flat + (dt * b + noise) / (Scalar(1) + dt * b.norm() + noise.norm());
            break;
        }
        case SchemeKind::trem: {
            const State<Scalar> p = project(x);
            next = flat + dt * full_drift(spec, p) + full_diffusion(spec, x) * dw;
            break;
        }
        case SchemeKind::dtrem: {
            const State<Scalar> p = project(x);
            next = flat + dt * full_drift(spec, p) + full_diffusion(spec, p) * dw;
            break;
        }
        default:
            throw std::invalid_argument("step_em_family: not an Euler-Maruyama-type scheme");
    }
    return State<Scalar>::from_flat(next, d, has_z);
}

template <typename Scalar>
State<Scalar> step(SchemeKind kind, const StepContext<Scalar>& ctx, const State<Scalar>& x) {
    return is_splitting(kind) ? step_splitting(kind, ctx, x) : step_em_family(kind, ctx, x);
}

/// Whether a scheme consumes half-step Brownian increments for this model.
template <typename Scalar>
bool needs_half_steps(SchemeKind kind, const ModelSpec<Scalar>& spec) {
    return kind == SchemeKind::strang && spec.is_ou();
}

struct SimulationOutcome {
    std::int64_t steps_done = 0;
    /// Index i of the first non-finite state X_{t_i}.
    std::optional<std::int64_t> exploded_at;
};

struct SimulationOptions {
    ChiRealization chi = ChiRealization::scaled_increment;
};

/// Advances x0 over n_steps steps of size dt, invoking observer(i, X_{t_i})
/// for i = 0..n (stopping early after a non-finite state). noise may be null
/// only for deterministic models.
template <typename Scalar, typename Observer>
SimulationOutcome simulate(SchemeKind kind, const ModelSpec<Scalar>& spec, const State<Scalar>& x0,
                           double dt, std::int64_t n_steps, const PathNoise* noise, Observer&& observer,
                           SimulationOptions options = {}) {
    check_state(spec, x0);
    if (!(dt > 0)) throw std::invalid_argument("step size must be positive");
    if (n_steps < 0) throw std::invalid_argument("negative number of steps");
    const bool stochastic = !spec.is_deterministic();
    const bool halves = needs_half_steps(kind, spec);
    if (stochastic) {
        if (!noise) throw std::invalid_argument("stochastic model simulated without noise");
        const std::int64_t m = noise->plan().steps_per(dt);
        if (halves && m % 2 != 0)
            throw std::invalid_argument("Strang steps of the OU model need an even number of base increments");
        if (m * n_steps > noise->size())
            throw std::invalid_argument("noise path is shorter than the simulated horizon");
    }

    SimulationOutcome out;
    State<Scalar> x = x0;
    observer(std::int64_t{0}, static_cast<const State<Scalar>&>(x));
    if (!x.all_finite()) {
        out.exploded_at = 0;
        return out;
    }
    std::vector<double> scratch;
    StepContext<Scalar> ctx{spec, Scalar(dt), {}, options.chi};
    for (std::int64_t i = 1; i <= n_steps; ++i) {
        if (stochastic) ctx.noise = step_noise(*noise, i - 1, dt, halves, scratch);
        x = step(kind, ctx, x);
        out.steps_done = i;
        observer(i, static_cast<const State<Scalar>&>(x));
        if (!x.all_finite()) {
            out.exploded_at = i;
            break;
        }
    }
    return out;
}

template <typename Scalar>
struct Trajectory {
    double dt = 0.0;
    std::vector<State<Scalar>> states;
    std::optional<std::int64_t> exploded_at;

    bool exploded() const { return exploded_at.has_value(); }
};

template <typename Scalar>
Trajectory<Scalar> simulate_path(SchemeKind kind, const ModelSpec<Scalar>& spec, const State<Scalar>& x0,
                                 double dt, double t_end, const PathNoise* noise,
                                 SimulationOptions options = {}) {
    const std::int64_t n = aligned_ratio(t_end, dt);
    Trajectory<Scalar> traj;
    traj.dt = dt;
    traj.states.reserve(static_cast<std::size_t>(n + 1));
    const auto outcome = simulate(
        kind, spec, x0, dt, n, noise,
        [&](std::int64_t, const State<Scalar>& s) { traj.states.push_back(s); }, options);
    traj.exploded_at = outcome.exploded_at;
    return traj;
}

}  // namespace hhsplit
