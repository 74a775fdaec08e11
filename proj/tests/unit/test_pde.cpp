#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rbsde/error.hpp"
#include "rbsde/generator.hpp"
#include "rbsde/obstacle_pde.hpp"

using namespace rbsde;

namespace {

PdeCoefficient constant(double c) {
    return [c](double, double) { return c; };
}

PdeSpec clamped_brownian() {
    PdeSpec s;
    s.vol = constant(1.0);
    s.lower = constant(-1.0);
    s.upper = constant(1.0);
    s.terminal = [](double x) { return std::clamp(x, -1.0, 1.0); };
    return s;
}

// Both obstacles bind: a positive source drives u into the upper one.
PdeSpec active_case() {
    PdeSpec s;
    s.vol = constant(0.8);
    s.drift = constant(0.3);
    s.driver = [](double, double x, double, double) { return 0.8 * std::tanh(3.0 * (x + 1.0)); };
    s.lower = constant(-0.6);
    s.upper = constant(0.6);
    s.terminal = [](double x) { return std::clamp(0.5 * x, -0.6, 0.6); };
    return s;
}

double max_diff(const GridValueFunction& a, const GridValueFunction& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    return m;
}

}  // namespace

TEST_SUITE("obstacle_pde") {
    TEST_CASE("second differences are exact on quadratics") {
        PdeSpec s;
        s.vol = constant(std::sqrt(2.0));
        const SpaceGrid g(-2.0, 2.0, 41);
        std::vector<double> u(41);
        for (std::size_t j = 0; j < 41; ++j) u[j] = g.x(j) * g.x(j);
        const auto lu = build_operator(s, g, 0.0).apply(u);
        for (std::size_t j = 1; j < 40; ++j) CHECK(lu[j] == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(lu[0] == 0.0);
    }

    TEST_CASE("upwind advection rows") {
        PdeSpec s;
        s.vol = constant(0.0);
        s.drift = constant(1.0);
        const SpaceGrid g(0.0, 1.0, 11);
        const auto op = build_operator(s, g, 0.0);
        for (std::size_t j = 1; j < 10; ++j) {
            CHECK(op.sub[j] == 0.0);
            CHECK(op.super[j] == doctest::Approx(10.0));
            CHECK(op.diag[j] == doctest::Approx(-10.0));
        }
        s.drift = constant(-2.0);
        const auto back = build_operator(s, g, 0.0);
        CHECK(back.sub[5] == doctest::Approx(20.0));
        CHECK(back.super[5] == 0.0);
    }

    TEST_CASE("state-dependent volatility") {
        // L u = 1/2 x^2 u'' = x^2 for u = x^2
        PdeSpec s;
        s.vol = [](double, double x) { return x; };
        const SpaceGrid g(0.5, 3.0, 26);
        std::vector<double> u(26);
        for (std::size_t j = 0; j < 26; ++j) u[j] = g.x(j) * g.x(j);
        const auto lu = build_operator(s, g, 0.0).apply(u);
        for (std::size_t j = 1; j < 25; ++j) CHECK(lu[j] == doctest::Approx(g.x(j) * g.x(j)).epsilon(1e-9));
    }

    TEST_CASE("far obstacle matches the unconstrained solve") {
        auto s = clamped_brownian();
        s.lower = constant(-1e6);
        const TimeGrid t(1.0, 40);
        const SpaceGrid g(-6.0, 6.0, 121);
        const auto free = solve_pde(s, t, g);
        const auto vi = solve_one_obstacle_vi(s, t, g);
        CHECK(max_diff(free, vi) <= 1e-10);
    }

    TEST_CASE("dominating obstacle") {
        PdeSpec s;
        s.vol = constant(1.0);
        s.lower = [](double t, double) { return t < 1.0 ? 0.5 : 0.0; };
        s.terminal = [](double) { return 0.0; };
        const auto u = solve_one_obstacle_vi(s, TimeGrid(1.0, 20), SpaceGrid(-3.0, 3.0, 61));
        for (std::size_t j = 0; j < 61; ++j) CHECK(u(0, j) >= 0.5);
    }

    TEST_CASE("American put complementarity") {
        const double K = 1.0, r = 0.05, vol = 0.2;
        PdeSpec s;
        s.vol = [vol](double, double x) { return vol * x; };
        s.drift = [r](double, double x) { return r * x; };
        s.discount = r;
        s.lower = [K](double, double x) { return std::max(K - x, 0.0); };
        s.terminal = [K](double x) { return std::max(K - x, 0.0); };
        const TimeGrid t(1.0, 400);
        const SpaceGrid g(0.0, 4.0, 801);
        const auto u = solve_one_obstacle_vi(s, t, g);
        for (std::size_t i = 0; i <= 400; i += 50)
            for (std::size_t j = 0; j < 801; ++j) CHECK(u(i, j) >= u.lower(i, j) - 1e-12);
        CHECK(u.value_at(0, 1.2) > 0.0);
        CHECK(u.value_at(0, 0.7) == doctest::Approx(0.3).epsilon(1e-9));
        CHECK(u.complementarity_residual < 1e-6);
        // binomial reference value of the at-the-money put, 0.060903
        CHECK(std::abs(u.value_at(0, 1.0) - 0.060903) < 5e-4);
    }

    TEST_CASE("clamped Brownian double obstacle") {
        const auto u = solve_double_obstacle_vi(clamped_brownian(), TimeGrid(1.0, 50), SpaceGrid(-6.0, 6.0, 400));
        CHECK(std::isfinite(u.value_at(0, 0.0)));
        CHECK(std::abs(u.value_at(0, 0.0)) <= 1e-9);
        for (double v : u.values()) CHECK(std::abs(v) <= 1.0);
    }

    TEST_CASE("log nonlinearity with slack obstacles") {
        PdeSpec s;
        s.vol = constant(0.7);
        s.driver = [](double, double, double v, double) { return -safe_ylogy(v); };
        s.lower = constant(-10.0);
        s.upper = constant(10.0);
        s.terminal = [](double) { return std::exp(1.0); };
        const auto u = solve_double_obstacle_vi(s, TimeGrid(1.0, 1000), SpaceGrid(-2.0, 2.0, 41));
        for (std::size_t j = 1; j < 40; ++j) CHECK(std::abs(u(0, j) - std::exp(std::exp(-1.0))) <= 2e-3);
        CHECK(u(0, 3) == doctest::Approx(u(0, 30)).epsilon(1e-12));
    }

    TEST_CASE("strict obstacle separation") {
        auto s = clamped_brownian();
        s.upper = constant(-1.0);
        s.terminal = [](double) { return -1.0; };
        CHECK_THROWS_AS(solve_double_obstacle_vi(s, TimeGrid(1.0, 5), SpaceGrid(-1.0, 1.0, 5)), InvalidArgument);
        auto t = clamped_brownian();
        t.terminal = [](double x) { return 2.0 * x; };
        CHECK_THROWS_AS(solve_double_obstacle_vi(t, TimeGrid(1.0, 5), SpaceGrid(-1.0, 1.0, 5)), InvalidArgument);
    }

    TEST_CASE("sandwich and complementarity on an active case") {
        const TimeGrid t(1.0, 100);
        const SpaceGrid g(-4.0, 4.0, 161);
        for (auto method : {ViMethod::psor, ViMethod::splitting}) {
            PdeOptions opts;
            opts.method = method;
            const auto u = solve_double_obstacle_vi(active_case(), t, g, opts);
            std::size_t upper_hits = 0, lower_hits = 0;
            for (std::size_t i = 0; i <= 100; ++i)
                for (std::size_t j = 0; j < 161; ++j) {
                    CHECK(u(i, j) >= u.lower(i, j) - 1e-12);
                    CHECK(u(i, j) <= u.upper(i, j) + 1e-12);
                    upper_hits += u(i, j) == u.upper(i, j);
                    lower_hits += u(i, j) == u.lower(i, j);
                }
            CHECK(upper_hits > 100);
            CHECK(lower_hits > 100);
            if (method == ViMethod::psor) CHECK(u.complementarity_residual < 1e-6);
        }
    }

    TEST_CASE("psor and splitting agree to first order") {
        const TimeGrid t(1.0, 200);
        const SpaceGrid g(-4.0, 4.0, 161);
        PdeOptions split;
        split.method = ViMethod::splitting;
        const auto a = solve_double_obstacle_vi(active_case(), t, g);
        const auto b = solve_double_obstacle_vi(active_case(), t, g, split);
        CHECK(max_diff(a, b) < 2e-2);
    }

    TEST_CASE("grid refinement") {
        double prev = 0.0, prev_delta = 1.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t nx = 81 * (1u << k) - ((1u << k) - 1), N = 25 * (1u << k);
            const auto u = solve_double_obstacle_vi(active_case(), TimeGrid(1.0, N), SpaceGrid(-4.0, 4.0, nx));
            const double v = u.value_at(0, -1.0);
            if (k > 0) {
                const double delta = std::abs(v - prev);
                CHECK(delta < 0.02);
                CHECK(delta < prev_delta);
                prev_delta = delta;
            }
            prev = v;
        }
    }

    TEST_CASE("penalized solutions") {
        const TimeGrid t(1.0, 100);
        const SpaceGrid g(-4.0, 4.0, 161);
        const auto vi = solve_double_obstacle_vi(active_case(), t, g);
        double prev_lo = 1e9, prev_hi = 1e9, prev_res = 0.0;
        for (double n : {10.0, 100.0, 1000.0, 10000.0}) {
            const auto lo = solve_penalized_pde(active_case(), t, g, n, PenaltySide::lower);
            const auto hi = solve_penalized_pde(active_case(), t, g, n, PenaltySide::upper);
            for (std::size_t k = 0; k < vi.values().size(); ++k) {
                CHECK(lo.u.values()[k] <= vi.values()[k] + 1e-9);
                CHECK(hi.u.values()[k] >= vi.values()[k] - 1e-9);
            }
            const double dlo = max_diff(lo.u, vi), dhi = max_diff(hi.u, vi);
            CHECK(dlo <= prev_lo + 1e-10);
            CHECK(dhi <= prev_hi + 1e-10);
            prev_lo = dlo;
            prev_hi = dhi;
            CHECK(std::isfinite(hi.penalty_residual));
            if (n > 10.0) CHECK(hi.penalty_residual <= 2.0 * prev_res + 1e-12);
            prev_res = hi.penalty_residual;
        }
        CHECK(prev_lo < 1e-2);
        CHECK(prev_hi < 1e-2);

        auto slack = clamped_brownian();
        slack.lower = constant(-5.0);
        slack.upper = constant(5.0);
        const auto p = solve_penalized_pde(slack, TimeGrid(1.0, 20), SpaceGrid(-3.0, 3.0, 61), 100.0, PenaltySide::both);
        CHECK(max_diff(p.u, solve_pde(slack, TimeGrid(1.0, 20), SpaceGrid(-3.0, 3.0, 61))) < 1e-10);
        CHECK(p.penalty_residual == 0.0);
    }

    TEST_CASE("splitting penalty uses policy iteration") {
        PdeOptions opts;
        opts.method = ViMethod::splitting;
        const TimeGrid t(1.0, 50);
        const SpaceGrid g(-4.0, 4.0, 81);
        const auto a = solve_penalized_pde(active_case(), t, g, 1000.0, PenaltySide::both, opts);
        const auto b = solve_penalized_pde(active_case(), t, g, 1000.0, PenaltySide::both);
        CHECK(max_diff(a.u, b.u) < 1e-8);
    }

    TEST_CASE("time transform") {
        const TimeGrid t(1.0, 4);
        const SpaceGrid g(0.0, 1.0, 3);
        GridValueFunction w(t, g);
        CHECK(max_diff(exp_time_transform(w, TransformDirection::forward), w) == 0.0);
        for (std::size_t i = 0; i <= 4; ++i)
            for (std::size_t j = 0; j < 3; ++j) w(i, j) = 1.0;
        const auto wb = exp_time_transform(w, TransformDirection::forward);
        CHECK(wb(4, 1) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));

        const TimeGrid tt(1.0, 50);
        const SpaceGrid gg(-4.0, 4.0, 161);
        const auto direct = solve_double_obstacle_vi(active_case(), tt, gg);
        const auto round = exp_time_transform(exp_time_transform(direct, TransformDirection::forward),
                                              TransformDirection::inverse);
        CHECK(max_diff(round, direct) <= 1e-12);
        const auto transformed = solve_double_obstacle_vi(make_time_transformed(active_case(), 1.0), tt, gg);
        CHECK(max_diff(exp_time_transform(transformed, TransformDirection::inverse), direct) <= 1e-3);
    }

    TEST_CASE("explicit steps are checked against the monotonicity bound") {
        PdeOptions opts;
        opts.theta = 0.0;
        try {
            solve_pde(clamped_brownian(), TimeGrid(1.0, 10), SpaceGrid(-3.0, 3.0, 61), opts);
            FAIL("expected InvalidArgument");
        } catch (const InvalidArgument& e) {
            CHECK(std::string(e.what()).find("time steps") != std::string::npos);
        }
        const auto expl = solve_pde(clamped_brownian(), TimeGrid(1.0, 400), SpaceGrid(-3.0, 3.0, 61), opts);
        const auto impl = solve_pde(clamped_brownian(), TimeGrid(1.0, 400), SpaceGrid(-3.0, 3.0, 61));
        CHECK(max_diff(expl, impl) < 5e-3);
    }

    TEST_CASE("value csv") {
        const auto u = solve_double_obstacle_vi(clamped_brownian(), TimeGrid(1.0, 2), SpaceGrid(-2.0, 2.0, 5));
        std::stringstream ss;
        write_value_csv(u, ss);
        std::string line;
        std::getline(ss, line);
        CHECK(line == "t,x,u,h,h',active_set");
        std::getline(ss, line);
        CHECK(line == "0,-2,-1,-1,1,lower");
        std::vector<PdeConvergenceRow> rows{{101, 20, 0.5, 0.0}};
        std::stringstream cs;
        write_pde_convergence_csv(rows, cs);
        CHECK(cs.str() == "nx,N,u00,delta_vs_previous\n101,20,0.5,0\n");
    }
}
