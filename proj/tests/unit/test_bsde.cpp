#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rbsde/bsde.hpp"
#include "rbsde/error.hpp"

using namespace rbsde;

namespace {

const RegressionBasis kCubic = RegressionBasis::polynomial(3);

// Closed form of dY/dt = K Y ln Y backwards from Y_T = xi > 0.
double log_ode(double xi, double k, double tau) { return std::exp(std::log(xi) * std::exp(-k * tau)); }

PathEnsemble brownian(std::size_t M, std::size_t N, std::uint64_t seed, double T = 1.0) {
    return simulate_paths(brownian_sde(1, {0.0}), TimeGrid(T, N), M, seed);
}

}  // namespace

TEST_SUITE("bsde") {
    TEST_CASE("constant terminal with zero driver") {
        const auto e = brownian(2000, 20, 1);
        const auto s = solve_bsde(zero_generator(), constant_terminal(1.5), e, kCubic);
        for (std::size_t i = 0; i <= 20; ++i)
            for (std::size_t m = 0; m < 2000; m += 97) CHECK(s.Y(m, i) == doctest::Approx(1.5).epsilon(1e-12));
        for (std::size_t m = 0; m < 2000; m += 97) CHECK(std::abs(s.Z(m, 3, 0)) < 1e-10);
        CHECK(s.Kplus(5, 20) == 0.0);
    }

    TEST_CASE("deterministic log ODE") {
        const auto e = simulate_paths(constant_sde(0.0, 0.0, 0.0), TimeGrid(1.0, 200), 1, 1);
        const auto s = solve_bsde(neg_y_log_y(1.0), constant_terminal(std::exp(1.0)), e, kCubic);
        CHECK(std::abs(s.y0() - log_ode(std::exp(1.0), 1.0, 1.0)) <= 5e-3);
        for (std::size_t i = 0; i <= 200; ++i)
            CHECK(std::abs(s.Y(0, i) - log_ode(std::exp(1.0), 1.0, 1.0 - e.grid().time(i))) <= 5e-3);
    }

    TEST_CASE("constant driver integrates to T - t") {
        const auto s = solve_bsde(constant_generator(1.0), constant_terminal(0.0), brownian(500, 10, 2), kCubic);
        CHECK(s.y0() == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("martingale representation of a linear terminal value") {
        // Y_t = E[X_T | X_t] = X_t and Z = 1 for xi = X_T.
        const auto e = brownian(20000, 10, 3);
        TerminalCondition xi{"x", [](std::span<const double> x) { return x[0]; }};
        const auto s = solve_bsde(zero_generator(), xi, e, kCubic);
        CHECK(std::abs(s.y0()) <= 3.0 * s.y0_se + 1e-12);
        double zmean = 0.0;
        for (std::size_t m = 0; m < 20000; ++m) zmean += s.Z(m, 5, 0);
        CHECK(zmean / 20000.0 == doctest::Approx(1.0).epsilon(0.02));
    }

    TEST_CASE("divergence cap names the step") {
        SolverOptions opts;
        opts.y_cap = 5.0;
        try {
            solve_bsde(constant_generator(100.0), constant_terminal(0.0), brownian(50, 10, 4), kCubic, opts);
            FAIL("expected NumericalError");
        } catch (const NumericalError& err) {
            CHECK(std::string(err.what()).find("step 9") != std::string::npos);
        }
    }

    TEST_CASE("generator envelope is a precondition") {
        auto f = neg_y_log_y(2.0);
        f.c0 = 1.0;
        CHECK_THROWS_AS(solve_bsde(f, constant_terminal(1.0), brownian(50, 5, 5), kCubic), InvalidArgument);
    }

    TEST_CASE("zero solution in every scheme") {
        const auto e = brownian(3000, 20, 6);
        const auto b = constant_barriers(-1.0, 1.0);
        const auto xi = constant_terminal(0.0);
        const auto sched = PenalizationSchedule::powers_of_two(4);
        std::vector<SolutionQuadruple> sols;
        sols.push_back(solve_bsde(zero_generator(), xi, e, kCubic));
        sols.push_back(solve_double_barrier_direct(zero_generator(), xi, b, e, kCubic));
        for (auto dir : {PenaltyDirection::increasing, PenaltyDirection::decreasing})
            for (auto& s : solve_double_barrier_penalized(zero_generator(), xi, b, e, kCubic, sched, dir).solutions)
                sols.push_back(std::move(s));
        for (auto& s : solve_one_barrier_penalized(zero_generator(), xi, b.lower, e, kCubic, sched).solutions)
            sols.push_back(std::move(s));
        CHECK(sols.size() == 2 + 3 * 5);
        for (const auto& s : sols)
            for (std::size_t i = 0; i <= 20; ++i)
                for (std::size_t m = 0; m < 3000; m += 131) {
                    CHECK(std::abs(s.Y(m, i)) <= 1e-10);
                    CHECK(std::abs(s.Kplus(m, i)) <= 1e-10);
                    CHECK(std::abs(s.Kminus(m, i)) <= 1e-10);
                    if (i < 20) CHECK(std::abs(s.Z(m, i, 0)) <= 1e-10);
                }
    }

    TEST_CASE("inactive lower barrier leaves the BSDE unchanged") {
        const auto e = brownian(2000, 10, 7);
        const auto xi = clamp_terminal(-1.0, 1.0);
        const auto plain = solve_bsde(neg_y_log_y(0.5), xi, e, kCubic);
        const auto run = solve_one_barrier_penalized(neg_y_log_y(0.5), xi,
                                                     [](double, std::span<const double>) { return -1e6; }, e, kCubic,
                                                     PenalizationSchedule::powers_of_two(3));
        for (const auto& s : run.solutions) CHECK(s.Y.data() == plain.Y.data());
    }

    TEST_CASE("one barrier on the first half of the horizon") {
        const auto e = brownian(4000, 40, 8);
        StateFunction lower = [](double t, std::span<const double>) { return t <= 0.5 ? 0.5 : -kInf; };
        const auto run = solve_one_barrier_penalized(zero_generator(), constant_terminal(0.0), lower, e, kCubic,
                                                     PenalizationSchedule::powers_of_two(10));
        CHECK(run.levels.back().y0 >= 0.5 - 0.05);
        for (std::size_t l = 1; l < run.levels.size(); ++l) {
            const auto& a = run.levels[l - 1];
            const auto& b = run.levels[l];
            CHECK(b.sup_residual_lower <= a.sup_residual_lower + 3.0 * (a.se + b.se));
            CHECK(b.y0 >= a.y0 - 3.0 * (a.se + b.se));
        }
        CHECK(run.levels.back().sup_residual_lower < 1e-6);
    }

    TEST_CASE("increasing penalization is pathwise monotone") {
        const auto e = brownian(3000, 25, 9);
        const auto b = constant_barriers(-0.2, 0.6);
        TerminalCondition xi = clamp_terminal(-0.2, 0.6);
        const auto run = solve_double_barrier_penalized(neg_y_log_y(1.0), xi, b, e, kCubic,
                                                        PenalizationSchedule::powers_of_two(6),
                                                        PenaltyDirection::increasing);
        // Regression error in the tails can break pathwise order slightly; the drops must stay
        // rare and small.
        std::size_t violations = 0, total = 0;
        double worst = 0.0;
        for (std::size_t l = 1; l < run.solutions.size(); ++l)
            for (std::size_t i = 0; i <= 25; ++i)
                for (std::size_t m = 0; m < 3000; ++m, ++total) {
                    const double drop = run.solutions[l - 1].Y(m, i) - run.solutions[l].Y(m, i);
                    worst = std::max(worst, drop);
                    if (drop > 3.0 * run.levels[l].se) ++violations;
                }
        CHECK(static_cast<double>(violations) < 1e-3 * static_cast<double>(total));
        CHECK(worst < 0.05);
        CHECK(run.levels.back().y0 >= run.levels.front().y0);
    }

    TEST_CASE("both penalization directions meet the direct scheme") {
        const auto e = brownian(10000, 25, 10);
        const auto b = constant_barriers(-0.3, 0.4);
        const auto xi = clamp_terminal(-0.3, 0.4);
        const auto sched = PenalizationSchedule::powers_of_two(10);
        const auto inc =
            solve_double_barrier_penalized(zero_generator(), xi, b, e, kCubic, sched, PenaltyDirection::increasing,
                                           {}, Retain::last);
        const auto dec =
            solve_double_barrier_penalized(zero_generator(), xi, b, e, kCubic, sched, PenaltyDirection::decreasing,
                                           {}, Retain::last);
        const auto direct = solve_double_barrier_direct(zero_generator(), xi, b, e, kCubic);
        CHECK(inc.solutions.size() == 1);
        for (std::size_t l = 1; l < inc.levels.size(); ++l) {
            CHECK(inc.levels[l].y0 >= inc.levels[l - 1].y0 - 3.0 * (inc.levels[l].se + inc.levels[l - 1].se));
            CHECK(dec.levels[l].y0 <= dec.levels[l - 1].y0 + 3.0 * (dec.levels[l].se + dec.levels[l - 1].se));
        }
        CHECK(std::abs(inc.levels.back().y0 - dec.levels.back().y0) <= 0.05);
        CHECK(std::abs(inc.levels.back().y0 - direct.y0()) <= 0.01);
    }

    TEST_CASE("direct scheme sandwich and flat-off") {
        const auto e = brownian(5000, 30, 11);
        const auto b = constant_barriers(-0.25, 0.25);
        const auto s = solve_double_barrier_direct(neg_y_log_y(1.0), clamp_terminal(-0.25, 0.25, 2.0), b, e, kCubic);
        for (std::size_t i = 0; i <= 30; ++i)
            for (std::size_t m = 0; m < 5000; ++m) {
                CHECK(s.Y(m, i) >= -0.25 - 1e-12);
                CHECK(s.Y(m, i) <= 0.25 + 1e-12);
            }
        const auto rep = check_skorokhod(s, b, e, 1e-8);
        CHECK(rep.passed());
        double kt = 0.0;
        for (std::size_t m = 0; m < 5000; ++m) kt += s.Kplus(m, 30) + s.Kminus(m, 30);
        CHECK(kt > 0.0);
    }

    TEST_CASE("narrow band pins Y") {
        const auto e = brownian(1000, 20, 12);
        BarrierPair b{[](double t, std::span<const double>) { return std::sin(t); },
                      [](double t, std::span<const double>) { return std::sin(t) + 0.02; }};
        TerminalCondition xi{"L_T", [](std::span<const double>) { return std::sin(1.0); }};
        const auto s = solve_double_barrier_direct(z_sqrt_log(1.0), xi, b, e, kCubic);
        for (std::size_t i = 0; i <= 20; ++i)
            for (std::size_t m = 0; m < 1000; m += 7) {
                const double t = e.grid().time(i);
                CHECK(s.Y(m, i) >= std::sin(t));
                CHECK(s.Y(m, i) <= std::sin(t) + 0.02);
            }
    }

    TEST_CASE("barrier data is validated") {
        const auto e = brownian(100, 5, 13);
        CHECK_THROWS_AS(solve_double_barrier_direct(zero_generator(), constant_terminal(2.0),
                                                    constant_barriers(-1.0, 1.0), e, kCubic),
                        InvalidArgument);
        BarrierPair touching{[](double, std::span<const double>) { return 0.0; },
                             [](double, std::span<const double>) { return 0.0; }};
        CHECK_THROWS_AS(
            solve_double_barrier_direct(zero_generator(), constant_terminal(0.0), touching, e, kCubic),
            InvalidArgument);
        PenalizationSchedule bad{{1.0, 4.0, 2.0}};
        CHECK_THROWS_AS(bad.validate(), InvalidArgument);
        CHECK_THROWS_AS((PenalizationSchedule{{0.5}}.validate()), InvalidArgument);
    }

    TEST_CASE("skorokhod report") {
        const auto e = brownian(4, 3, 14);
        const auto b = constant_barriers(-1.0, 1.0);
        SolutionQuadruple s(e.grid(), 4, 1);
        auto rep = check_skorokhod(s, b, e, 1e-8);
        CHECK(rep.passed());
        CHECK(rep.residual_lower[0] == 0.0);
        // push applied while Y sits one unit above L
        s.Y(2, 1) = 0.0;
        s.Kplus(2, 2) = 0.5;
        s.Kplus(2, 3) = 0.5;
        rep = check_skorokhod(s, b, e, 1e-8);
        REQUIRE(rep.failing_paths.size() == 1);
        CHECK(rep.failing_paths[0] == 2);
        CHECK(rep.residual_lower[2] == doctest::Approx(0.5));
        // decreasing K
        SolutionQuadruple d(e.grid(), 4, 1);
        d.Kminus(1, 2) = 0.3;
        d.Y(1, 1) = 1.0;
        rep = check_skorokhod(d, b, e, 1e-8);
        CHECK(rep.failing_paths == std::vector<std::size_t>{1});
    }

    TEST_CASE("comparison for shifted drivers") {
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int k = 0; k < 5; ++k) {
            const auto e = brownian(2000, 20, 100 + k);
            const double c = 0.05 + 0.95 * u(rng);
            const auto f = neg_y_log_y(u(rng));
            const auto b = constant_barriers(-1.0 - u(rng), 1.0 + u(rng));
            const auto xi = clamp_terminal(-1.0, 1.0);
            const auto a = solve_double_barrier_direct(f, xi, b, e, kCubic);
            const auto a2 = solve_double_barrier_direct(shifted(f, c), xi, b, e, kCubic);
            CHECK(a.y0() <= a2.y0() + 3.0 * std::hypot(a.y0_se, a2.y0_se));
        }
    }

    TEST_CASE("convergence csv") {
        PenalizedRun run;
        run.levels.push_back({1.0, 0.5, 0.01, 0.2, 0.0, 0.1, 0.0});
        std::stringstream ss;
        write_convergence_csv(run, ss);
        std::string header;
        std::getline(ss, header);
        CHECK(header == "n,Y0,SE,sup_residual_lower,sup_residual_upper,Kplus_T_mean,Kminus_T_mean");
        std::string row;
        std::getline(ss, row);
        CHECK(row == "1,0.5,0.01,0.20000000000000001,0,0.10000000000000001,0");
    }
}
