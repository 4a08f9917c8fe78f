#include "doctest.h"
#include "support.hpp"

#include <random>

using namespace testing;

TEST_CASE("linear transition limits") {
    const auto far = linear_transition(-1.0, 3.0, 0.0, 60.0);
    CHECK(far.mean_mult == doctest::Approx(0.0).epsilon(1e-20));
    CHECK(far.mean_add == doctest::Approx(3.0).epsilon(1e-14));

    const auto zero = linear_transition(-1.0, 3.0, 2.0, 0.0);
    CHECK(zero.mean_mult == 1.0);
    CHECK(zero.mean_add == 0.0);
    CHECK(zero.stdev == 0.0);

    const auto half = linear_transition(-1.0, 0.0, 1.0, 0.5);
    CHECK(half.variance() == doctest::Approx((1.0 - std::exp(-1.0)) / 2.0).epsilon(1e-14));
    CHECK(half.variance() == doctest::Approx(0.316060).epsilon(1e-6));

    for (double dt : {1e-3, 0.1, 1.0, 5.0})
        CHECK(linear_transition(-1.0, 0.0, 1.0, dt).variance() ==
              doctest::Approx((1.0 - std::exp(-2.0 * dt)) / 2.0).epsilon(1e-13));
}

TEST_CASE("linear transition at a = 0") {
    const auto t = linear_transition(0.0, 2.0, 3.0, 0.25);
    CHECK(t.mean_mult == 1.0);
    CHECK(t.mean_add == 0.5);
    CHECK(t.variance() == doctest::Approx(9.0 * 0.25));
    const auto tiny = linear_transition(1e-12, 2.0, 3.0, 0.25);
    CHECK(tiny.mean_add == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("linear transition errors") {
    CHECK_THROWS_AS(linear_transition(-1.0, 0.0, 1.0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(linear_transition(std::nan(""), 0.0, 1.0, 0.1), std::domain_error);
}

TEST_CASE("variance small-step expansion") {
    for (double a : {-5.0, -1.0, -0.1, 0.5})
        for (double dt : {1e-2, 1e-3, 1e-4}) {
            const double s = 0.7;
            const double var = linear_transition(a, 0.0, s, dt).variance();
            const double rel = std::abs(var - s * s * dt) / (s * s * dt);
            if (a < 0)
                CHECK(rel <= std::abs(a) * dt);
            else
                CHECK(rel <= a * dt * (1 + a * dt));
        }
}

TEST_CASE("two half steps make one step") {
    for (double a : {-3.0, -0.5, 0.2})
        for (double dt : {0.01, 0.3, 2.0}) {
            const double c = 1.3, s = 0.8;
            const auto h = linear_transition(a, c, s, dt / 2);
            const auto f = linear_transition(a, c, s, dt);
            CHECK(h.mean_mult * h.mean_mult == doctest::Approx(f.mean_mult).epsilon(1e-12));
            CHECK(h.mean_mult * h.mean_add + h.mean_add == doctest::Approx(f.mean_add).epsilon(1e-12));
            CHECK(h.mean_mult * h.mean_mult * h.variance() + h.variance() ==
                  doctest::Approx(f.variance()).epsilon(1e-12));
        }
}

TEST_CASE("psi_d examples") {
    const auto spec = frozen_model(-1.0, 0.0, 0.0, 1);
    const auto& c = spec.coefficients;
    GateVector<double> u(1);
    u << 0.0;
    CHECK(psi_d(std::log(2.0) / 2.0, 0.0, u, c)(0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(psi_d(0.0, 3.0, u, c)(0) == 0.0);
    CHECK(psi_d(100.0, 3.0, u, c)(0) == doctest::Approx(0.5).epsilon(1e-15));
    const auto multi = frozen_model(-1.0, 0.0, 0.0, 4);
    const GateVector<double> w = GateVector<double>::Constant(4, 0.9);
    CHECK((psi_d(1e3, 0.0, w, multi.coefficients).array() - 0.5).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(psi_d(-1.0, 0.0, u, c), std::invalid_argument);
    CHECK_THROWS_AS(psi_d(1.0, 0.0, w, c), std::invalid_argument);
}

TEST_CASE("u_infinity") {
    const auto spec = hh_model(HHParams::spiking());
    const auto r = hh_rates(-65.0, -65.0);
    const double an = r.alpha(0), bn = r.beta(0);
    const auto ui = u_infinity(-65.0, spec.coefficients);
    CHECK(ui(0) == doctest::Approx(an / (an + bn)).epsilon(1e-14));
    CHECK(ui(0) == doctest::Approx(0.31768).epsilon(1e-4));
    for (double v : {-300.0, -65.0, 0.0, 100.0, 300.0}) {
        const auto x = u_infinity(v, spec.coefficients);
        CHECK((x.array() >= 0).all());
        CHECK((x.array() <= 1).all());
    }
    CHECK((u_infinity(0.0, frozen_model(-1, 0, 0, 3, 2.0, 2.0).coefficients).array() == 0.5).all());
}

TEST_CASE("psi_d semigroup and range on hh gates") {
    const auto spec = hh_model(HHParams::spiking());
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> v(-150.0, 100.0), u(0.0, 1.0), t(0.0, 0.5);
    for (int k = 0; k < 500; ++k) {
        const double vv = v(gen), s = t(gen), r = t(gen);
        GateVector<double> g(3);
        g << u(gen), u(gen), u(gen);
        const auto once = psi_d(s + r, vv, g, spec.coefficients);
        const auto twice = psi_d(r, vv, psi_d(s, vv, g, spec.coefficients), spec.coefficients);
        CHECK((once - twice).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((once.array() >= -1e-12).all());
        CHECK((once.array() <= 1 + 1e-12).all());
    }
}
