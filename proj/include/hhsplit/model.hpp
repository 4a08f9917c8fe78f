#pragma once

#include "hhsplit/types.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>

namespace hhsplit {

template <typename Scalar>
struct GateRates {
    GateVector<Scalar> alpha;
    GateVector<Scalar> beta;
};

/// Coefficients of the conditionally linear system
///
///   dV = (a(U) V + b(U)) dt + Sigma(U) dW
///   dU = (-diag(alpha(V) + beta(V)) U + alpha(V)) dt
///
/// The callables must be C^1 with a < 0 on [0,1]^d and alpha, beta > 0; the
/// library samples these conditions in tests but cannot prove them for user
/// supplied functions. alpha and beta share one callable so instances like
/// Hodgkin-Huxley evaluate their exponentials once per voltage.
template <typename Scalar>
struct CoefficientSet {
    int dim = 0;
    std::function<Scalar(const GateVector<Scalar>&)> a;
    std::function<Scalar(const GateVector<Scalar>&)> b;
    std::function<GateRates<Scalar>(Scalar)> rates;
    std::function<Scalar(const GateVector<Scalar>&)> sigma;

    GateVector<Scalar> alpha(Scalar v) const { return rates(v).alpha; }
    GateVector<Scalar> beta(Scalar v) const { return rates(v).beta; }
};

struct BrownianMultiplicative {};

struct OrnsteinUhlenbeck {
    double theta = 1.0;
    double mu = 0.0;
    double sigma = 1.0;
};

struct Deterministic {};

using NoiseVariant = std::variant<BrownianMultiplicative, OrnsteinUhlenbeck, Deterministic>;

template <typename Scalar>
struct ModelSpec {
    CoefficientSet<Scalar> coefficients;
    NoiseVariant noise = BrownianMultiplicative{};

    int dim() const { return coefficients.dim; }
    bool is_ou() const { return std::holds_alternative<OrnsteinUhlenbeck>(noise); }
    bool is_deterministic() const { return std::holds_alternative<Deterministic>(noise); }
    const OrnsteinUhlenbeck& ou() const { return std::get<OrnsteinUhlenbeck>(noise); }

    /// Diffusion coefficient acting on V for the given gates (zero when deterministic).
    Scalar v_diffusion(const GateVector<Scalar>& u) const {
        if (is_deterministic()) return Scalar(0);
        if (is_ou()) return Scalar(ou().sigma);
        return coefficients.sigma(u);
    }
};

template <typename Scalar>
void validate(const ModelSpec<Scalar>& spec) {
    const auto& c = spec.coefficients;
    if (c.dim < 1 || c.dim > kMaxGates)
        throw std::invalid_argument("gating dimension must lie in [1, " +
                                    std::to_string(kMaxGates) + "], got " +
                                    std::to_string(c.dim));
    if (!c.a || !c.b || !c.rates)
        throw std::invalid_argument("coefficient set is missing a, b or rates");
    if (std::holds_alternative<BrownianMultiplicative>(spec.noise) && !c.sigma)
        throw std::invalid_argument("Brownian-driven model requires a diffusion coefficient");
    if (spec.is_ou()) {
        const auto& p = spec.ou();
        if (!(p.theta > 0) || !(p.sigma > 0) || !std::isfinite(p.mu))
            throw std::invalid_argument("OU noise requires theta > 0, sigma > 0, finite mu");
    }
}

template <typename Scalar>
void check_state(const ModelSpec<Scalar>& spec, const State<Scalar>& x) {
    if (x.dim() != spec.dim())
        throw std::invalid_argument("state has " + std::to_string(x.dim()) +
                                    " gates, model has " + std::to_string(spec.dim()));
    if (spec.is_ou() != x.z.has_value())
        throw std::invalid_argument(spec.is_ou() ? "OU model requires the auxiliary z component"
                                                 : "z component given for a model without OU noise");
}

// ---------------------------------------------------------------------------
// Hodgkin-Huxley instance

struct HHParams {
    double C = 1.0;
    double g_K = 36.0;
    double g_Na = 120.0;
    double g_L = 0.3;
    double E_K = -77.0;
    double E_Na = 55.0;
    double E_L = -61.0;
    double I = 10.0;
    double V_rest = -65.0;

    /// Every parameter set to one.
    static HHParams unit() { return {1, 1, 1, 1, 1, 1, 1, 1, 1}; }
    /// Parameter set with regular spiking (the default member values).
    static HHParams spiking() { return {}; }
};

inline void validate(const HHParams& p) {
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(p.C) || !finite(p.g_K) || !finite(p.g_Na) || !finite(p.g_L) || !finite(p.E_K) ||
        !finite(p.E_Na) || !finite(p.E_L) || !finite(p.I) || !finite(p.V_rest))
        throw std::invalid_argument("Hodgkin-Huxley parameters must be finite");
    if (!(p.C > 0) || !(p.g_K > 0) || !(p.g_Na > 0) || !(p.g_L > 0))
        throw std::invalid_argument("capacitance and conductances must be positive");
}

namespace detail {

// x / (exp(x/10) - 1), continuous through x = 0 where it equals 10.
template <typename Scalar>
Scalar exprel_ratio(Scalar x) {
    using std::abs;
    using std::expm1;
    const Scalar y = x / Scalar(10);
    if (abs(y) < Scalar(1e-8)) return Scalar(10) * (Scalar(1) - y / Scalar(2));
    return Scalar(10) * y / expm1(y);
}

}  // namespace detail

/// Rates (alpha_n, alpha_m, alpha_h) and (beta_n, beta_m, beta_h).
template <typename Scalar>
GateRates<Scalar> hh_rates(Scalar v, Scalar v_rest) {
    using std::exp;
    using std::isfinite;
    if (!isfinite(v) || !isfinite(v_rest)) throw std::domain_error("hh_rates: non-finite voltage");
    const Scalar depol = v_rest - v;
    GateRates<Scalar> r;
    r.alpha.resize(3);
    r.beta.resize(3);
    r.alpha(0) = Scalar(0.01) * detail::exprel_ratio(Scalar(10) + depol);
    r.alpha(1) = Scalar(0.1) * detail::exprel_ratio(Scalar(25) + depol);
    r.alpha(2) = Scalar(0.07) * exp(depol / Scalar(20));
    r.beta(0) = Scalar(0.125) * exp(depol / Scalar(80));
    r.beta(1) = Scalar(4) * exp(depol / Scalar(18));
    r.beta(2) = Scalar(1) / (exp((Scalar(30) + depol) / Scalar(10)) + Scalar(1));
    return r;
}

/// Sigma(u) = sigma (additive noise).
template <typename Scalar>
std::function<Scalar(const GateVector<Scalar>&)> additive_sigma(double sigma) {
    return [s = Scalar(sigma)](const GateVector<Scalar>&) { return s; };
}

/// Sigma(u) = sigma * |u|^2.
template <typename Scalar>
std::function<Scalar(const GateVector<Scalar>&)> quadratic_sigma(double sigma) {
    return [s = Scalar(sigma)](const GateVector<Scalar>& u) { return s * u.squaredNorm(); };
}

/// Hodgkin-Huxley model written in conditionally linear form with U = (n, m, h).
template <typename Scalar = double>
CoefficientSet<Scalar> hh_coefficients(const HHParams& params,
                                       std::function<Scalar(const GateVector<Scalar>&)> sigma = {}) {
    validate(params);
    const Scalar C = params.C, gK = params.g_K, gNa = params.g_Na, gL = params.g_L;
    const Scalar EK = params.E_K, ENa = params.E_Na, EL = params.E_L, I = params.I;
    const Scalar v_rest = params.V_rest;

    CoefficientSet<Scalar> c;
    c.dim = 3;
    c.a = [=](const GateVector<Scalar>& u) {
        const Scalar n4 = u(0) * u(0) * u(0) * u(0);
        const Scalar m3h = u(1) * u(1) * u(1) * u(2);
        return (-gK * n4 - gNa * m3h - gL) / C;
    };
    c.b = [=](const GateVector<Scalar>& u) {
        const Scalar n4 = u(0) * u(0) * u(0) * u(0);
        const Scalar m3h = u(1) * u(1) * u(1) * u(2);
        return (I + gK * EK * n4 + gNa * ENa * m3h + gL * EL) / C;
    };
    c.rates = [=](Scalar v) { return hh_rates<Scalar>(v, v_rest); };
    c.sigma = sigma ? std::move(sigma) : additive_sigma<Scalar>(0.0);
    return c;
}

/// Drift b(x) of the full system, including the Z row in the OU case.
template <typename Scalar>
StateVector<Scalar> full_drift(const ModelSpec<Scalar>& spec, const State<Scalar>& x) {
    check_state(spec, x);
    const auto& c = spec.coefficients;
    const int d = spec.dim();
    StateVector<Scalar> out(x.flat_size());
    out(0) = c.a(x.u) * x.v + c.b(x.u);
    const auto r = c.rates(x.v);
    out.segment(1, d) = (-(r.alpha + r.beta).array() * x.u.array() + r.alpha.array()).matrix();
    if (spec.is_ou()) {
        const auto& p = spec.ou();
        const Scalar z_drift = Scalar(p.theta) * (Scalar(p.mu) - *x.z);
        out(0) += z_drift;
        out(1 + d) = z_drift;
    }
    return out;
}

/// Diffusion column sigma(x) of the full system (single Brownian driver).
template <typename Scalar>
StateVector<Scalar> full_diffusion(const ModelSpec<Scalar>& spec, const State<Scalar>& x) {
    check_state(spec, x);
    StateVector<Scalar> out = StateVector<Scalar>::Zero(x.flat_size());
    out(0) = spec.v_diffusion(x.u);
    if (spec.is_ou()) out(x.flat_size() - 1) = Scalar(spec.ou().sigma);
    return out;
}

}  // namespace hhsplit
