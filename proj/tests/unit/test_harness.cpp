#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "rbsde/harness/experiment.hpp"
#include "rbsde/harness/registry.hpp"

using namespace rbsde;
using namespace rbsde::harness;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string field_of(const std::string& text) {
    try {
        parse(text).validate();
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("rbsde_harness_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_SUITE("harness") {
    TEST_CASE("config parsing") {
        const auto c = parse(
            "# comment\n[experiment]\nscenario = penalized\nseed = 42\n\n[grid]\nsteps = 80\nhorizon = 2.5\n"
            "[barrier]\nname = lower_only\nlower = -inf\n[solver]\ncheck_generator = false\n");
        CHECK(c.scenario == "penalized");
        CHECK(c.seed == 42);
        CHECK(c.grid.steps == 80);
        CHECK(c.grid.horizon == 2.5);
        CHECK(c.barrier.lower == -kInf);
        CHECK_FALSE(c.solver.check_generator);
        CHECK(c.grid.paths == ExperimentConfig{}.grid.paths);
    }

    TEST_CASE("errors name the offending field") {
        CHECK(field_of("[grid]\nstep = 3\n") == "grid.step");
        CHECK(field_of("[gird]\nsteps = 3\n") == "gird");
        CHECK(field_of("[experiment]\nscenario = log-ode\n[grid]\nsteps = 0\n") == "grid.steps");
        CHECK(field_of("[experiment]\nscenario = log-ode\n[grid]\nsteps = -4\n") == "grid.steps");
        CHECK(field_of("[experiment]\nscenario = log-ode\n[grid]\nhorizon = abc\n") == "grid.horizon");
        CHECK(field_of("[experiment]\nscenario = nope\n") == "experiment.scenario");
        CHECK(field_of("[grid]\nsteps = 10\n") == "experiment.scenario");
        CHECK(field_of("[experiment]\nscenario = bsde\n[generator]\nname = cubic\n") == "generator.name");
        CHECK(field_of("[experiment]\nscenario = bsde\n[barrier]\nlower = 2\nupper = 1\n") == "barrier.lower");
        CHECK(field_of("[experiment]\nscenario = bsde\n[diagnostics]\np = 2\n") == "diagnostics.p");
        CHECK(field_of("[experiment]\nscenario = bsde\n[tolerances]\ncross = 0\n") == "tolerances.cross");
        CHECK(field_of("[experiment]\nscenario = bsde\n[solver]\ncheck_generator = maybe\n") == "solver.check_generator");
    }

    TEST_CASE("flatten round trip") {
        auto c = parse("[experiment]\nscenario = game\n[grid]\nx_min = -3.25\nx_max = 4\n[barrier]\nupper = inf\n");
        std::ostringstream ini;
        std::string section;
        for (const auto& [key, value] : c.flatten()) {
            const auto dot = key.find('.');
            if (key.substr(0, dot) != section) ini << '[' << (section = key.substr(0, dot)) << "]\n";
            ini << key.substr(dot + 1) << " = " << value << '\n';
        }
        const auto back = parse(ini.str());
        CHECK(back.flatten() == c.flatten());
    }

    TEST_CASE("registry") {
        GeneratorConfig g;
        g.name = "neg_y_log_y";
        g.K = 2.0;
        const double x[] = {0.0}, z[] = {0.0};
        CHECK(eval_generator(make_generator(g), 0.0, x, std::exp(1.0), z) == doctest::Approx(-2.0 * std::exp(1.0)));
        BarrierConfig b;
        b.name = "lower_only";
        b.lower = -0.5;
        const auto bp = make_barriers(b);
        CHECK(bp.lower_at(0.0, x) == -0.5);
        CHECK(bp.upper_at(0.0, x) == kInf);
        TerminalConfig t;
        const double far[] = {3.0};
        CHECK(make_terminal(t)(far) == 1.0);

        ExperimentConfig c;
        c.scenario = "pde";
        const auto grid = make_space_grid(c);
        CHECK(grid.x_min == -6.0);
        CHECK(grid.x_max == 6.0);
        c.sde.dim = 2;
        CHECK_THROWS_AS(make_pde_spec(c), ConfigError);
    }

    TEST_CASE("log-ode scenario") {
        auto c = parse("[experiment]\nscenario = log-ode\n[grid]\nsteps = 200\npaths = 1\n[generator]\nname = "
                       "neg_y_log_y\n[terminal]\nname = constant\nvalue = 2.718281828459045\n");
        const auto r = run_scenario(c, false);
        CHECK(r.passed());
        CHECK(r.metrics["Y0"].get<double>() == doctest::Approx(1.44467).epsilon(5e-3));
        CHECK(r.artifacts.empty());
        c.terminal.value = -1.0;
        CHECK_THROWS_AS(run_scenario(c, false), ConfigError);
    }

    TEST_CASE("failing checks make the run fail") {
        auto c = parse("[experiment]\nscenario = bsde\n[grid]\nsteps = 10\npaths = 500\n[generator]\nname = "
                       "constant\nc = 1\n[terminal]\nname = constant\n[diagnostics]\nexpected_y0 = 1.5\n");
        const auto r = run_scenario(c, false);
        CHECK_FALSE(r.passed());
        c.out = scratch("fail").string();
        std::ostringstream log;
        CHECK(run_experiment(c, &log) == 1);
        CHECK(log.str().find("FAIL |Y0 - expected|") != std::string::npos);
        const auto j = nlohmann::json::parse(slurp(std::filesystem::path(c.out) / "results.json"));
        CHECK(j["passed"] == false);
        CHECK(j["anchor"].get<std::string>().find("f(s, y_s, z_s)") != std::string::npos);
        std::filesystem::remove_all(c.out);
    }

    TEST_CASE("zero game scenario") {
        auto c = parse("[experiment]\nscenario = zero-game\n[grid]\nsteps = 8\npaths = 400\n");
        c.out = scratch("zero_game").string();
        CHECK(run_experiment(c, nullptr) == 0);
        const auto rep = nlohmann::json::parse(slurp(std::filesystem::path(c.out) / "game_report.json"));
        CHECK(rep["J_star"] == 0.0);
        CHECK(rep["Y0"] == 0.0);
        CHECK(rep["sigma_hist"].size() == 9);
        CHECK(rep["sigma_hist"][8] == 400);
        for (const char* k : {"Y0", "J_star", "SE", "isaacs_gap_max", "violations_lower", "violations_upper",
                              "tau_hist", "sigma_hist"})
            CHECK(rep.contains(k));
        std::filesystem::remove_all(c.out);
    }

    TEST_CASE("same config and seed give identical outputs") {
        auto c = parse("[experiment]\nscenario = penalized\nseed = 9\n[grid]\nsteps = 10\npaths = 1000\n[solver]\n"
                       "scheme = decreasing\npenalty_max_exponent = 4\n");
        const auto a = scratch("repro_a"), b = scratch("repro_b");
        c.out = a.string();
        run_experiment(c, nullptr);
        c.out = b.string();
        run_experiment(c, nullptr);
        CHECK(slurp(a / "convergence.csv") == slurp(b / "convergence.csv"));
        CHECK_FALSE(slurp(a / "convergence.csv").empty());
        c.seed = 10;
        c.out = b.string();
        run_experiment(c, nullptr);
        CHECK(slurp(a / "convergence.csv") != slurp(b / "convergence.csv"));
        std::filesystem::remove_all(a);
        std::filesystem::remove_all(b);
    }

    TEST_CASE("convergence study") {
        auto c = parse("[experiment]\nscenario = pde\n[grid]\nsteps = 20\nnx = 41\n[generator]\nname = constant\nc = "
                       "0.5\n[barrier]\nname = none\n");
        const auto t = convergence_study(c, "N", 3);
        REQUIRE(t.rows.size() == 3);
        CHECK(t.metric == "u00");
        CHECK(t.rows[2].value == 80.0);
        for (const auto& r : t.rows) CHECK(r.metric == doctest::Approx(0.5).epsilon(1e-9));
        CHECK_THROWS_AS(convergence_study(c, "penalty"), ConfigError);
        CHECK_THROWS_AS(convergence_study(c, "dx"), ConfigError);

        c.scenario = "penalized";
        c.solver.scheme = "increasing";
        c.solver.penalty_max_exponent = 3;
        c.grid.paths = 500;
        const auto p = convergence_study(c, "penalty");
        CHECK(p.rows.size() == 4);
        CHECK(p.rows.back().value == 8.0);
        std::ostringstream os;
        write_convergence_table(p, os);
        CHECK(os.str().rfind("penalty,Y0,SE,delta_vs_previous\n", 0) == 0);
    }
}
