#include "doctest.h"
#include "support.hpp"

using namespace testing;

TEST_CASE("philox4x64-10 known answers") {
    const Philox4x64::Key key{0x0123456789abcdefULL, 0xfedcba9876543210ULL};
    const auto c1 = Philox4x64::block({1, 0, 0, 0}, key);
    CHECK(c1[0] == 0x2d2e7c09c193c5faULL);
    CHECK(c1[1] == 0xd56c6aa2d11f06aaULL);
    CHECK(c1[2] == 0x184fcdf7f5474a23ULL);
    CHECK(c1[3] == 0x367832d087008054ULL);
    const auto c0 = Philox4x64::block({0, 0, 0, 0}, key);
    CHECK(c0[0] == 0xad7a3aeef4f85615ULL);
    CHECK(c0[3] == 0x406b099ce1041e74ULL);
}

TEST_CASE("counter streams") {
    const CounterStream a(5, StreamTag::brownian, 0), b(5, StreamTag::brownian, 1), c(5, StreamTag::monte_carlo, 0);
    CHECK(a.normal(7) == CounterStream(5, StreamTag::brownian, 0).normal(7));
    CHECK(a.normal(7) != b.normal(7));
    CHECK(a.normal(7) != c.normal(7));
    std::vector<double> block(11);
    a.fill_normal(3, block);
    for (std::size_t k = 0; k < block.size(); ++k) CHECK(block[k] == a.normal(3 + k));
    for (std::uint64_t k = 0; k < 1000; ++k) {
        const double u = a.uniform(k);
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("path noise determinism and separation") {
    const NoisePlan plan{42, 4, 1.0, 1e-3};
    const auto p0 = generate_path_noise(plan, 0);
    const auto again = generate_path_noise(plan, 0);
    const auto p1 = generate_path_noise(plan, 1);
    CHECK(p0.size() == 1000);
    CHECK(std::equal(p0.increments().begin(), p0.increments().end(), again.increments().begin()));
    CHECK_FALSE(std::equal(p0.increments().begin(), p0.increments().end(), p1.increments().begin()));
    const PathNoise lazy(plan, 0, false);
    CHECK_FALSE(lazy.materialized());
    std::vector<double> scratch;
    const auto w = lazy.window(10, 20, scratch);
    for (int k = 0; k < 20; ++k) CHECK(w[static_cast<std::size_t>(k)] == p0.increment(10 + k));
    CHECK_THROWS_AS(PathNoise(plan, 4), std::out_of_range);
    CHECK_THROWS_AS(PathNoise(plan, -1), std::out_of_range);
    CHECK_THROWS_AS(p0.increment(1000), std::out_of_range);
}

TEST_CASE("increment sample mean") {
    const double h = 1e-4;
    const NoisePlan plan{7, 1, 100.0, h};
    const auto p = generate_path_noise(plan, 0);
    REQUIRE(p.size() == 1000000);
    double s = 0.0;
    for (double x : p.increments()) s += x / std::sqrt(h);
    CHECK(std::abs(s / 1e6) < 3e-3);
}

TEST_CASE("standardized increments have unit variance") {
    const NoisePlan plan{9, 1, 1e5 * 0.01, 1e-3};
    const auto p = generate_path_noise(plan, 0);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = xi_at(p, i, 0.01);
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = (s2 - n * mean * mean) / (n - 1);
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("aggregation identities") {
    const double h = 0x1.0p-10;
    const NoisePlan plan{3, 1, 1.0, h};
    const auto p = generate_path_noise(plan, 0);
    for (int m : {2, 8, 64}) {
        const double dt = m * h;
        for (int i = 0; i < 5; ++i) {
            const double full = xi_at(p, i, dt);
            const double a = xi_at(p, i, dt, Window::first_half);
            const double b = xi_at(p, i, dt, Window::second_half);
            CHECK(full * std::sqrt(dt) == doctest::Approx(a * std::sqrt(dt / 2) + b * std::sqrt(dt / 2)).epsilon(1e-12));
            CHECK(full == doctest::Approx((a + b) / std::sqrt(2.0)).epsilon(1e-12));
            double raw = 0.0;
            for (int k = 0; k < m; ++k) raw += p.increment(i * m + k);
            CHECK(full * std::sqrt(dt) == doctest::Approx(raw).epsilon(1e-12));
            std::vector<double> scratch;
            const auto sn = step_noise(p, i, dt, true, scratch);
            CHECK(sn.xi == doctest::Approx(full).epsilon(1e-12));
            CHECK(sn.xi_first == doctest::Approx(a).epsilon(1e-12));
            CHECK(sn.xi_second == doctest::Approx(b).epsilon(1e-12));
            CHECK(sn.increments.size() == static_cast<std::size_t>(m));
        }
    }
    CHECK(xi_at(p, 17, h) == doctest::Approx(p.increment(17) / std::sqrt(h)).epsilon(1e-15));
}

TEST_CASE("alignment errors") {
    const NoisePlan plan{3, 1, 1.0, 1e-3};
    const auto p = generate_path_noise(plan, 0);
    CHECK_THROWS_AS(xi_at(p, 0, 1.5e-3), std::invalid_argument);
    CHECK_THROWS_AS(xi_at(p, 0, 3e-3, Window::first_half), std::invalid_argument);
    CHECK_THROWS_AS(xi_at(p, 1000, 1e-3), std::out_of_range);
    std::vector<double> scratch;
    CHECK_THROWS_AS(step_noise(p, 0, 3e-3, true, scratch), std::invalid_argument);
    CHECK(aligned_ratio(0.01, 1e-5) == 1000);
    CHECK(aligned_ratio(0x1.0p-6, 0x1.0p-15) == 512);
    CHECK_THROWS_AS(aligned_ratio(1e-5, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(aligned_ratio(0.0, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS((NoisePlan{0, 1, 1.0, 0.3}.validate()), std::invalid_argument);
}
