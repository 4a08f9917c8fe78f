#pragma once

#include "hhsplit/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hhsplit {

/// One-step law of dY = (a Y + c) dt + s dW over dt:
///   Y(dt) = mean_mult * Y(0) + mean_add + stdev * xi,  xi ~ N(0, 1).
template <typename Scalar>
struct LinearTransition {
    Scalar mean_mult{1};
    Scalar mean_add{0};
    Scalar stdev{0};

    Scalar apply(Scalar y, Scalar xi) const { return mean_mult * y + mean_add + stdev * xi; }
    Scalar variance() const { return stdev * stdev; }
};

/// Exact transition of the scalar linear SDE. Switches to the a -> 0 limit when
/// |a| dt < 1e-10.
template <typename Scalar>
LinearTransition<Scalar> linear_transition(Scalar a, Scalar c, Scalar s, Scalar dt) {
    using std::abs;
    using std::exp;
    using std::expm1;
    using std::isfinite;
    using std::sqrt;
    if (!isfinite(a) || !isfinite(c) || !isfinite(s) || !isfinite(dt))
        throw std::domain_error("linear_transition: non-finite argument");
    if (dt < Scalar(0)) throw std::invalid_argument("linear_transition: negative step");

    LinearTransition<Scalar> t;
    const Scalar x = a * dt;
    if (abs(x) < Scalar(1e-10)) {
        t.mean_mult = Scalar(1) + x;
        t.mean_add = c * dt;
        t.stdev = abs(s) * sqrt(dt);
        return t;
    }
    const Scalar em1 = expm1(x);
    t.mean_mult = exp(x);
    t.mean_add = c / a * em1;
    // (e^{2x} - 1) / (2a) = dt * expm1(2x) / (2x), always >= 0
    const Scalar var = s * s * expm1(Scalar(2) * x) / (Scalar(2) * a);
    t.stdev = sqrt(var > Scalar(0) ? var : Scalar(0));
    return t;
}

/// Steady state alpha / (alpha + beta) of the gating ODE.
template <typename Scalar>
GateVector<Scalar> u_infinity(const GateRates<Scalar>& r) {
    return (r.alpha.array() / (r.alpha.array() + r.beta.array())).matrix();
}

template <typename Scalar>
GateVector<Scalar> u_infinity(Scalar v, const CoefficientSet<Scalar>& coeffs) {
    return u_infinity(coeffs.rates(v));
}

/// Exact flow of the gating ODE with V frozen at v. The result is a convex
/// combination of u and the steady state, so [0,1]^d is preserved.
template <typename Scalar>
GateVector<Scalar> psi_d(Scalar dt, const GateRates<Scalar>& r, const GateVector<Scalar>& u) {
    const auto k = (r.alpha + r.beta).array();
    const auto decay = (-k * dt).eval();
    const auto u_inf = r.alpha.array() / k;
    return (decay.exp() * u.array() - decay.expm1() * u_inf).matrix();
}

template <typename Scalar>
GateVector<Scalar> psi_d(Scalar dt, Scalar v, const GateVector<Scalar>& u,
                         const CoefficientSet<Scalar>& coeffs) {
    if (dt < Scalar(0)) throw std::invalid_argument("psi_d: negative step");
    if (u.size() != coeffs.dim) throw std::invalid_argument("psi_d: dimension mismatch");
    return psi_d(dt, coeffs.rates(v), u);
}

}  // namespace hhsplit
