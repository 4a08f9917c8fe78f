#pragma once

#include "hhsplit/harness.hpp"

#include <cmath>

namespace testing {

using namespace hhsplit;

// Constant coefficients: a, b, alpha, beta, Sigma all frozen.
inline ModelSpec<double> frozen_model(double a, double b, double sigma, int dim = 1, double alpha = 1.0,
                                      double beta = 1.0, NoiseVariant noise = BrownianMultiplicative{}) {
    CoefficientSet<double> c;
    c.dim = dim;
    c.a = [a](const GateVector<double>&) { return a; };
    c.b = [b](const GateVector<double>&) { return b; };
    GateRates<double> r{GateVector<double>::Constant(dim, alpha), GateVector<double>::Constant(dim, beta)};
    c.rates = [r](double) { return r; };
    c.sigma = additive_sigma<double>(sigma);
    return {c, noise};
}

inline ModelSpec<double> hh_model(const HHParams& p, double sigma = 1.0, bool quadratic = false,
                                  NoiseVariant noise = BrownianMultiplicative{}) {
    return {hh_coefficients<double>(p, quadratic ? quadratic_sigma<double>(sigma) : additive_sigma<double>(sigma)),
            noise};
}

inline State<double> make_state(double v, std::initializer_list<double> u, std::optional<double> z = {}) {
    State<double> s;
    s.v = v;
    s.u.resize(static_cast<Eigen::Index>(u.size()));
    Eigen::Index i = 0;
    for (double x : u) s.u(i++) = x;
    s.z = z;
    return s;
}

inline State<double> rest_state(const ModelSpec<double>& spec, double v) {
    State<double> s;
    s.v = v;
    s.u = u_infinity(v, spec.coefficients);
    return s;
}

inline StepNoise fixed_noise(double xi1, double xi2) {
    StepNoise n;
    n.xi_first = xi1;
    n.xi_second = xi2;
    n.xi = (xi1 + xi2) / std::sqrt(2.0);
    return n;
}

}  // namespace testing
