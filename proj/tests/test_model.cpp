#include "doctest.h"
#include "support.hpp"

#include <limits>
#include <random>

using namespace testing;

TEST_CASE("hh rates at rest") {
    const double e = std::exp(1.0);
    const auto r = hh_rates(-65.0, -65.0);
    CHECK(r.alpha(0) == doctest::Approx(0.1 / (e - 1.0)).epsilon(1e-14));
    CHECK(r.alpha(0) == doctest::Approx(0.058198).epsilon(1e-5));
    CHECK(r.alpha(1) == doctest::Approx(2.5 / (std::exp(2.5) - 1.0)).epsilon(1e-14));
    CHECK(r.alpha(2) == doctest::Approx(0.07).epsilon(1e-14));
    CHECK(r.beta(0) == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(r.beta(1) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(r.beta(2) == doctest::Approx(1.0 / (std::exp(3.0) + 1.0)).epsilon(1e-14));
}

TEST_CASE("removable singularities") {
    const double vr = -65.0;
    CHECK(hh_rates(vr + 10.0, vr).alpha(0) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(hh_rates(vr + 25.0, vr).alpha(1) == doctest::Approx(1.0).epsilon(1e-14));
    for (double eps : {1e-6, -1e-6, 1e-9, -1e-9}) {
        CHECK(std::abs(hh_rates(vr + 10.0 + eps, vr).alpha(0) - 0.1) <= 1e-8);
        CHECK(std::abs(hh_rates(vr + 25.0 + eps, vr).alpha(1) - 1.0) <= 1e-7);
    }
}

TEST_CASE("hh rates reject non-finite input") {
    CHECK_THROWS_AS(hh_rates(std::nan(""), 0.0), std::domain_error);
    CHECK_THROWS_AS(hh_rates(0.0, std::numeric_limits<double>::infinity()), std::domain_error);
}

TEST_CASE("rates positive and a negative") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> v(-500.0, 500.0), u(0.0, 1.0);
    const HHParams p = HHParams::spiking();
    const auto c = hh_coefficients<double>(p);
    for (int k = 0; k < 2000; ++k) {
        const auto r = c.rates(v(gen));
        CHECK((r.alpha.array() > 0).all());
        CHECK((r.beta.array() > 0).all());
        GateVector<double> g(3);
        g << u(gen), u(gen), u(gen);
        CHECK(c.a(g) <= -p.g_L / p.C);
        CHECK(std::isfinite(c.b(g)));
    }
}

TEST_CASE("unit coefficients at closed gates") {
    const auto c = hh_coefficients<double>(HHParams::unit());
    const GateVector<double> u = GateVector<double>::Zero(3);
    CHECK(c.a(u) == -1.0);
    CHECK(c.b(u) == 2.0);
    CHECK(c.dim == 3);
}

TEST_CASE("full drift") {
    SUBCASE("constant model") {
        const auto spec = frozen_model(-1.0, 0.0, 0.0);
        const auto d = full_drift(spec, make_state(2.0, {0.5}));
        CHECK(d.size() == 2);
        CHECK(d(0) == -2.0);
        CHECK(d(1) == 0.0);
    }
    SUBCASE("ou row vanishes at the mean") {
        const auto spec = frozen_model(-1.0, 0.0, 0.0, 1, 1, 1, OrnsteinUhlenbeck{2.0, 0.7, 1.0});
        const auto d = full_drift(spec, make_state(1.0, {0.2}, 0.7));
        CHECK(d.size() == 3);
        CHECK(d(2) == 0.0);
        CHECK(d(0) == -1.0);
    }
    SUBCASE("gates at steady state") {
        const auto spec = hh_model(HHParams::spiking());
        for (double v : {-80.0, -65.0, -55.0, 0.0, 30.0}) {
            const auto d = full_drift(spec, rest_state(spec, v));
            CHECK(d.segment(1, 3).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("full diffusion") {
    const auto spec = hh_model(HHParams::unit(), 2.0, true);
    const auto x = make_state(0.0, {0.5, 0.5, 1.0});
    const auto g = full_diffusion(spec, x);
    CHECK(g(0) == doctest::Approx(2.0 * 1.5));
    CHECK(g.tail(3).isZero());
    const auto ou = hh_model(HHParams::unit(), 1.0, false, OrnsteinUhlenbeck{1.0, 0.0, 0.4});
    const auto go = full_diffusion(ou, make_state(0.0, {0.5, 0.5, 1.0}, 0.0));
    CHECK(go(0) == 0.4);
    CHECK(go(4) == 0.4);
}

TEST_CASE("model validation") {
    auto spec = frozen_model(-1.0, 0.0, 1.0);
    CHECK_NOTHROW(validate(spec));
    spec.coefficients.dim = 0;
    CHECK_THROWS_AS(validate(spec), std::invalid_argument);
    CHECK_THROWS_AS(validate(frozen_model(-1, 0, 1, 1, 1, 1, OrnsteinUhlenbeck{0.0, 0.0, 1.0})), std::invalid_argument);
    CHECK_THROWS_AS(validate(frozen_model(-1, 0, 1, 1, 1, 1, OrnsteinUhlenbeck{1.0, 0.0, -1.0})), std::invalid_argument);
    HHParams p;
    p.C = 0.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = HHParams{};
    p.g_Na = -1.0;
    CHECK_THROWS_AS(hh_coefficients<double>(p), std::invalid_argument);
}

TEST_CASE("state checks") {
    const auto bm = frozen_model(-1.0, 0.0, 1.0, 2);
    CHECK_THROWS_AS(check_state(bm, make_state(0.0, {0.5})), std::invalid_argument);
    CHECK_THROWS_AS(check_state(bm, make_state(0.0, {0.5, 0.5}, 1.0)), std::invalid_argument);
    const auto ou = frozen_model(-1.0, 0.0, 1.0, 2, 1, 1, OrnsteinUhlenbeck{});
    CHECK_THROWS_AS(check_state(ou, make_state(0.0, {0.5, 0.5})), std::invalid_argument);
    CHECK_NOTHROW(check_state(ou, make_state(0.0, {0.5, 0.5}, 0.0)));
}

TEST_CASE("deterministic variant ignores sigma") {
    const auto spec = hh_model(HHParams::unit(), 3.0, false, Deterministic{});
    CHECK(spec.v_diffusion(GateVector<double>::Constant(3, 0.5)) == 0.0);
}

TEST_CASE("spiking preset") {
    const auto p = HHParams::spiking();
    CHECK(p.V_rest == -65.0);
    CHECK(p.g_K == 36.0);
    CHECK(p.g_Na == 120.0);
    CHECK(p.g_L == 0.3);
    CHECK(p.E_K == -77.0);
    CHECK(p.E_Na == 55.0);
    CHECK(p.E_L == -61.0);
    CHECK(p.I == 10.0);
    CHECK_NOTHROW(hh_coefficients<double>(p));
}

TEST_CASE("coefficients in long double") {
    const auto c = hh_coefficients<long double>(HHParams::unit());
    GateVector<long double> u = GateVector<long double>::Zero(3);
    CHECK(c.a(u) == -1.0L);
    CHECK(c.rates(1.0L).beta(0) == doctest::Approx(0.125));
}
