#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rbsde/error.hpp"
#include "rbsde/regression.hpp"

using namespace rbsde;

TEST_SUITE("regression") {
    TEST_CASE("constants are reproduced") {
        std::vector<double> x(50), v(50, 2.5), fit(50);
        for (std::size_t i = 0; i < 50; ++i) x[i] = std::sin(static_cast<double>(i));
        for (auto basis : {RegressionBasis::polynomial(3), RegressionBasis::piecewise_constant(5)}) {
            Regressor r(basis, x, 1);
            r.fit(v, fit);
            for (double f : fit) CHECK(f == doctest::Approx(2.5).epsilon(1e-12));
        }
    }

    TEST_CASE("identity is recovered exactly") {
        std::vector<double> x(40);
        for (std::size_t i = 0; i < 40; ++i) x[i] = -3.0 + 0.15 * static_cast<double>(i);
        const auto f = regress_conditional_expectation(x, x, 1, RegressionBasis::polynomial(2));
        for (double s : {-3.0, -1.0, 0.2, 2.85}) CHECK(std::abs(f(std::vector<double>{s}) - s) < 1e-10);
    }

    TEST_CASE("noisy quadratic coefficient") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::normal_distribution<double> noise(0.0, 0.1);
        const std::size_t M = 10000;
        std::vector<double> x(M), v(M);
        for (std::size_t i = 0; i < M; ++i) {
            x[i] = u(rng);
            v[i] = x[i] * x[i] + noise(rng);
        }
        auto basis = RegressionBasis::polynomial(2);
        basis.clip_lo = {-1.0};
        basis.clip_hi = {1.0};
        const auto f = regress_conditional_expectation(v, x, 1, basis);
        CHECK(std::abs(f.coefficients()[2] - 1.0) <= 0.05);
        CHECK(std::abs(f.coefficients()[1]) <= 0.05);
    }

    TEST_CASE("degenerate states reduce to the sample mean") {
        std::vector<double> x(6, 0.3), v{1, 2, 3, 4, 5, 6}, fit(6);
        Regressor r(RegressionBasis::polynomial(3), x, 1);
        CHECK(r.columns() == 1);
        r.fit(v, fit);
        for (double f : fit) CHECK(f == doctest::Approx(3.5));
    }

    TEST_CASE("too few samples") {
        std::vector<double> x{0.0, 1.0, 2.0};
        CHECK_THROWS_AS(Regressor(RegressionBasis::polynomial(3), x, 1), InvalidArgument);
    }

    TEST_CASE("rank deficiency engages the ridge fallback") {
        // two distinct states, cubic basis in two dimensions collapses onto few directions
        std::vector<double> x;
        for (int i = 0; i < 30; ++i) {
            const double s = (i % 2) ? 1.0 : -1.0;
            x.push_back(s);
            x.push_back(2.0 * s);
        }
        std::vector<double> v(30), fit(30);
        for (int i = 0; i < 30; ++i) v[i] = (i % 2) ? 4.0 : -2.0;
        Regressor r(RegressionBasis::polynomial(2), x, 2);
        CHECK(r.ridge_used());
        r.fit(v, fit);
        for (int i = 0; i < 30; ++i) CHECK(fit[i] == doctest::Approx(v[i]).epsilon(1e-6));
    }

    TEST_CASE("multivariate total degree basis") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n01;
        const std::size_t M = 500;
        std::vector<double> x(2 * M), v(M);
        for (std::size_t i = 0; i < M; ++i) {
            x[2 * i] = n01(rng);
            x[2 * i + 1] = n01(rng);
            v[i] = 1.0 + x[2 * i] * x[2 * i + 1] - 0.5 * x[2 * i + 1];
        }
        const auto f = regress_conditional_expectation(v, x, 2, RegressionBasis::polynomial(2));
        CHECK(RegressionBasis::polynomial(2).size(2) == 6);
        for (std::size_t i = 0; i < 10; ++i)
            CHECK(f(std::span<const double>(x.data() + 2 * i, 2)) == doctest::Approx(v[i]).epsilon(1e-9));
    }

    TEST_CASE("piecewise constant bins average within bins") {
        std::vector<double> x{0.0, 0.1, 0.9, 1.0}, v{1.0, 3.0, 10.0, 20.0}, fit(4);
        Regressor r(RegressionBasis::piecewise_constant(2), x, 1);
        r.fit(v, fit);
        CHECK(fit[0] == doctest::Approx(2.0));
        CHECK(fit[3] == doctest::Approx(15.0));
    }
}
