#include "rbsde/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rbsde/bsde.hpp"
#include "rbsde/diagnostics.hpp"
#include "rbsde/game.hpp"
#include "rbsde/harness/registry.hpp"

namespace rbsde::harness {

namespace fs = std::filesystem;

bool ScenarioResult::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

class Context {
public:
    Context(const ExperimentConfig& cfg, ScenarioResult& result, bool write)
        : cfg(cfg), result(result), write_(write) {}

    const ExperimentConfig& cfg;
    ScenarioResult& result;

    void at_most(const std::string& name, double value, double limit) {
        result.checks.push_back({name, value, limit, "<=", value <= limit});
    }
    void at_least(const std::string& name, double value, double limit) {
        result.checks.push_back({name, value, limit, ">=", value >= limit});
    }
    void equals(const std::string& name, double value, double expected) {
        result.checks.push_back({name, value, expected, "==", value == expected});
    }

    void artifact(const std::string& name, const std::function<void(std::ostream&)>& body) {
        if (!write_) return;
        fs::create_directories(cfg.out);
        std::ofstream out(fs::path(cfg.out) / name);
        if (!out) throw Error("cannot write " + (fs::path(cfg.out) / name).string());
        out << std::setprecision(17);
        body(out);
        result.artifacts.push_back(name);
    }

private:
    bool write_;
};

PathEnsemble simulate(const ExperimentConfig& cfg, const SdeSpec& sde, std::size_t paths) {
    return simulate_paths(sde, TimeGrid(cfg.grid.horizon, cfg.grid.steps), paths, cfg.seed, cfg.workers);
}

PathEnsemble simulate(const ExperimentConfig& cfg) { return simulate(cfg, make_sde(cfg.sde), cfg.grid.paths); }

void write_summary(const SolutionQuadruple& s, std::ostream& out) {
    out << "node,t,Y_mean,Y_sd,Kplus_mean,Kminus_mean\n";
    const double n = static_cast<double>(s.paths());
    for (std::size_t i = 0; i <= s.grid.steps(); ++i) {
        double m = 0.0, ss = 0.0, kp = 0.0, km = 0.0;
        for (std::size_t p = 0; p < s.paths(); ++p) {
            m += s.Y(p, i);
            kp += s.Kplus(p, i);
            km += s.Kminus(p, i);
        }
        m /= n;
        for (std::size_t p = 0; p < s.paths(); ++p) ss += (s.Y(p, i) - m) * (s.Y(p, i) - m);
        out << i << ',' << s.grid.time(i) << ',' << m << ',' << std::sqrt(ss / n) << ',' << kp / n << ',' << km / n
            << '\n';
    }
}

void record_solution(Context& ctx, const SolutionQuadruple& s) {
    ctx.result.metrics["Y0"] = s.y0();
    ctx.result.metrics["SE"] = s.y0_se;
    ctx.result.metrics["ridge_fallbacks"] = s.ridge_fallbacks;
}

// Integrability diagnostics on the terminal values and the positive part of the lower barrier.
void record_moments(Context& ctx, const PathEnsemble& ens, const TerminalCondition& xi, const BarrierPair& b) {
    DiagnosticsConfig d{ctx.cfg.diagnostics.lambda, ctx.cfg.diagnostics.p};
    std::vector<double> xs(ens.paths()), sup_l(ens.paths(), 0.0);
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        xs[m] = xi(ens.state(m, ens.grid().steps()));
        for (std::size_t i = 0; i <= ens.grid().steps(); ++i) {
            const double l = b.lower_at(ens.grid().time(i), ens.state(m, i));
            if (std::isfinite(l)) sup_l[m] = std::max(sup_l[m], std::max(l, 0.0));
        }
    }
    const auto tm = terminal_moment(xs, d, ens.grid().horizon());
    const auto bm = barrier_moment(sup_l, d, ens.grid().horizon());
    ctx.result.metrics["terminal_moment"] = {{"exponent", tm.exponent}, {"estimate", tm.estimate}};
    ctx.result.metrics["lower_barrier_moment"] = {{"exponent", bm.exponent}, {"estimate", bm.estimate}};
    ctx.at_least("terminal moment finite", tm.finite ? 1.0 : 0.0, 1.0);
}

double max_abs(const PathField& f) {
    double m = 0.0;
    for (double v : f.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_z(const SolutionQuadruple& s) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.grid.steps(); ++i)
        for (double v : s.Z.slice(i)) m = std::max(m, std::abs(v));
    return m;
}

void scenario_bsde(Context& ctx) {
    ctx.result.anchor = "explicit backward recursion for y_t = xi + int_t^T f(s, y_s, z_s) ds - int_t^T z_s dB_s";
    const auto ens = simulate(ctx.cfg);
    const auto xi = make_terminal(ctx.cfg.terminal);
    const auto s = solve_bsde(make_generator(ctx.cfg.generator), xi, ens, make_basis(ctx.cfg.solver),
                              make_solver_options(ctx.cfg.solver));
    record_solution(ctx, s);
    record_moments(ctx, ens, xi, no_barriers());
    if (!std::isnan(ctx.cfg.diagnostics.expected_y0))
        ctx.at_most("|Y0 - expected|", std::abs(s.y0() - ctx.cfg.diagnostics.expected_y0),
                    ctx.cfg.tolerances.y0 + ctx.cfg.tolerances.se_multiple * s.y0_se);
    ctx.artifact("solution_summary.csv", [&](std::ostream& o) { write_summary(s, o); });
}

void scenario_log_ode(Context& ctx) {
    ctx.result.anchor = "prototype generator f(y) = -K y ln|y| against the ODE solution Y_t = exp(ln(xi) e^{-K(T-t)})";
    const auto& c = ctx.cfg;
    if (c.generator.name != "neg_y_log_y") throw ConfigError("generator.name", "log-ode needs neg_y_log_y");
    if (c.terminal.name != "constant" || !(c.terminal.value > 0.0))
        throw ConfigError("terminal.value", "log-ode needs a constant positive terminal value");
    // Deterministic mode: one path of a frozen forward process.
    const auto ens = simulate(c, constant_sde(c.sde.x0, 0.0, 0.0), 1);
    const auto s = solve_bsde(neg_y_log_y(c.generator.K), constant_terminal(c.terminal.value), ens,
                              make_basis(c.solver), make_solver_options(c.solver));
    auto oracle = [&](double t) {
        return std::exp(std::log(c.terminal.value) * std::exp(-c.generator.K * (c.grid.horizon - t)));
    };
    record_solution(ctx, s);
    ctx.result.metrics["oracle_Y0"] = oracle(0.0);
    ctx.at_most("|Y0 - closed form|", std::abs(s.y0() - oracle(0.0)), c.tolerances.y0);
    ctx.artifact("log_ode.csv", [&](std::ostream& o) {
        o << "node,t,Y,closed_form\n";
        for (std::size_t i = 0; i <= s.grid.steps(); ++i)
            o << i << ',' << s.grid.time(i) << ',' << s.Y(0, i) << ',' << oracle(s.grid.time(i)) << '\n';
    });
}

void scenario_zero_solution(Context& ctx) {
    ctx.result.anchor = "f = 0, xi = 0, L = -1, U = 1 has the unique solution (Y, Z, K+, K-) = 0";
    const auto ens = simulate(ctx.cfg);
    const auto gen = zero_generator();
    const auto xi = constant_terminal(0.0);
    const auto band = constant_barriers(-1.0, 1.0);
    const auto basis = make_basis(ctx.cfg.solver);
    const auto opts = make_solver_options(ctx.cfg.solver);
    const auto sched = PenalizationSchedule::powers_of_two(ctx.cfg.solver.penalty_max_exponent);
    const double tol = ctx.cfg.tolerances.zero;
    auto check = [&](const std::string& scheme, const SolutionQuadruple& s) {
        const double m = std::max({max_abs(s.Y), max_abs_z(s), max_abs(s.Kplus), max_abs(s.Kminus)});
        ctx.result.metrics["max_abs_" + scheme] = m;
        ctx.at_most(scheme + ": max |Y|, |Z|, |K|", m, tol);
    };
    check("unconstrained", solve_bsde(gen, xi, ens, basis, opts));
    check("direct", solve_double_barrier_direct(gen, xi, band, ens, basis, opts));
    check("increasing",
          solve_double_barrier_penalized(gen, xi, band, ens, basis, sched, PenaltyDirection::increasing, opts,
                                         Retain::last)
              .solutions.back());
    check("decreasing",
          solve_double_barrier_penalized(gen, xi, band, ens, basis, sched, PenaltyDirection::decreasing, opts,
                                         Retain::last)
              .solutions.back());
    check("one_barrier",
          solve_one_barrier_penalized(gen, xi, band.lower, ens, basis, sched, opts, Retain::last).solutions.back());
    ctx.result.metrics["Y0"] = 0.0;
}

void scenario_penalized(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string& scheme = c.solver.scheme;
    if (scheme != "increasing" && scheme != "decreasing" && scheme != "one_barrier")
        throw ConfigError("solver.scheme", "the penalized scenario needs increasing, decreasing or one_barrier");
    const auto ens = simulate(c);
    const auto gen = make_generator(c.generator);
    const auto xi = make_terminal(c.terminal);
    const auto band = make_barriers(c.barrier);
    const auto sched = PenalizationSchedule::powers_of_two(c.solver.penalty_max_exponent);
    const bool upward = scheme != "decreasing";
    PenalizedRun run;
    if (scheme == "one_barrier") {
        ctx.result.anchor = "solutions of y = xi + int f + n (L - y)^+ ds - int z dB increase to the reflected solution";
        if (!band.lower) throw ConfigError("barrier.name", "one_barrier needs a lower barrier");
        run = solve_one_barrier_penalized(gen, xi, band.lower, ens, make_basis(c.solver), sched,
                                          make_solver_options(c.solver), Retain::last);
    } else {
        ctx.result.anchor = upward ? "increasing scheme: lower barrier penalized, upper reflected; limit is the "
                                     "doubly reflected solution"
                                   : "decreasing scheme: upper barrier penalized, lower reflected; limit is the "
                                     "doubly reflected solution";
        run = solve_double_barrier_penalized(
            gen, xi, band, ens, make_basis(c.solver), sched,
            upward ? PenaltyDirection::increasing : PenaltyDirection::decreasing, make_solver_options(c.solver),
            Retain::last);
    }
    double worst = -kInf;
    auto levels = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < run.levels.size(); ++k) {
        const auto& l = run.levels[k];
        levels.push_back({{"n", l.n}, {"Y0", l.y0}, {"SE", l.se}});
        if (k == 0) continue;
        const auto& p = run.levels[k - 1];
        // Positive when the sequence moves against the expected direction beyond the noise.
        const double step = upward ? p.y0 - l.y0 : l.y0 - p.y0;
        worst = std::max(worst, step - c.tolerances.se_multiple * std::hypot(l.se, p.se));
    }
    const auto& last = run.levels.back();
    record_solution(ctx, run.solutions.back());
    ctx.result.metrics["levels"] = levels;
    if (run.levels.size() > 1)
        ctx.at_most(upward ? "Y0 nondecreasing in n (worst drop beyond noise)"
                           : "Y0 nonincreasing in n (worst rise beyond noise)",
                    worst, 0.0);
    const double residual = upward ? last.sup_residual_lower : last.sup_residual_upper;
    ctx.result.metrics["sup_residual"] = residual;
    ctx.at_most(upward ? "final sup (L - Y)^+" : "final sup (Y - U)^+", residual, c.tolerances.sup_residual);
    ctx.artifact("convergence.csv", [&](std::ostream& o) { write_convergence_csv(run, o); });
}

void scenario_double_barrier(Context& ctx) {
    ctx.result.anchor = "Skorokhod conditions int (Y - L) dK+ = int (U - Y) dK- = 0 with L <= Y <= U";
    const auto& c = ctx.cfg;
    const auto ens = simulate(c);
    const auto band = make_barriers(c.barrier);
    const auto xi = make_terminal(c.terminal);
    const auto s = solve_double_barrier_direct(make_generator(c.generator), xi, band, ens, make_basis(c.solver),
                                               make_solver_options(c.solver));
    record_solution(ctx, s);
    record_moments(ctx, ens, xi, band);
    const auto rep = check_skorokhod(s, band, ens, c.tolerances.skorokhod);
    ctx.result.metrics["skorokhod_failing_paths"] = rep.failing_paths.size();
    ctx.at_most("max flat-off residual / (1 + K_T)", rep.max_scaled_residual, c.tolerances.skorokhod);
    ctx.equals("paths failing the flat-off check", static_cast<double>(rep.failing_paths.size()), 0.0);
    const auto bp = evaluate_barriers(band, ens);
    double outside = 0.0;
    for (std::size_t i = 0; i <= s.grid.steps(); ++i)
        for (std::size_t m = 0; m < s.paths(); ++m)
            outside = std::max({outside, bp.lower(m, i) - s.Y(m, i), s.Y(m, i) - bp.upper(m, i)});
    ctx.at_most("max barrier violation", outside, 0.0);
    ctx.artifact("solution_summary.csv", [&](std::ostream& o) { write_summary(s, o); });
}

GridValueFunction solve_configured_pde(const ExperimentConfig& c) {
    const PdeSpec p = make_pde_spec(c);
    const TimeGrid t(c.grid.horizon, c.grid.steps);
    const SpaceGrid g = make_space_grid(c);
    const auto o = make_pde_options(c.pde);
    // A missing obstacle is infinite, so the double-obstacle solver covers the one-sided cases.
    if (p.lower || p.upper) return solve_double_obstacle_vi(p, t, g, o);
    return solve_pde(p, t, g, o);
}

void record_pde(Context& ctx, const GridValueFunction& u) {
    const auto& c = ctx.cfg;
    ctx.result.metrics["u00"] = u.value_at(0, c.sde.x0);
    ctx.result.metrics["sweeps"] = u.sweeps;
    ctx.result.metrics["complementarity_residual"] = u.complementarity_residual;
    double outside = 0.0;
    for (std::size_t i = 0; i <= u.time().steps(); ++i)
        for (std::size_t j = 0; j < u.space().nx; ++j)
            outside = std::max({outside, u.lower(i, j) - u(i, j), u(i, j) - u.upper(i, j)});
    ctx.at_most("sandwich h <= u <= h'", outside, 1e-12);
    if (c.barrier.name != "none")
        ctx.at_most("complementarity residual", u.complementarity_residual, c.tolerances.complementarity);
}

void scenario_pde(Context& ctx) {
    ctx.result.anchor = "double-obstacle problem min[u - h, max{-u_t - L u - f(t, x, u, sigma u_x), u - h'}] = 0";
    const auto u = solve_configured_pde(ctx.cfg);
    record_pde(ctx, u);
    ctx.artifact("value.csv", [&](std::ostream& o) { write_value_csv(u, o); });
}

void scenario_cross_validate(Context& ctx) {
    ctx.result.anchor = "u(t, x) = Y^{t,x}_t links the reflected BSDE and the double-obstacle problem";
    const auto& c = ctx.cfg;
    const auto ens = simulate(c);
    const auto gen = make_generator(c.generator);
    const auto xi = make_terminal(c.terminal);
    const auto band = make_barriers(c.barrier);
    auto solve = [&]() {
        if (c.solver.scheme == "increasing" || c.solver.scheme == "decreasing") {
            const auto sched = PenalizationSchedule::powers_of_two(c.solver.penalty_max_exponent);
            auto run = solve_double_barrier_penalized(gen, xi, band, ens, make_basis(c.solver), sched,
                                                      c.solver.scheme == "increasing" ? PenaltyDirection::increasing
                                                                                       : PenaltyDirection::decreasing,
                                                      make_solver_options(c.solver), Retain::last);
            return std::move(run.solutions.back());
        }
        if (c.solver.scheme == "direct")
            return solve_double_barrier_direct(gen, xi, band, ens, make_basis(c.solver), make_solver_options(c.solver));
        throw ConfigError("solver.scheme", "cross-validate needs direct, increasing or decreasing");
    };
    const SolutionQuadruple s = solve();
    const auto u = solve_configured_pde(c);
    record_solution(ctx, s);
    record_pde(ctx, u);
    const double gap = std::abs(s.y0() - u.value_at(0, c.sde.x0));
    ctx.result.metrics["abs_gap"] = gap;
    ctx.at_most("|Y0 (LSMC) - u(0, x0) (FD)|", gap, c.tolerances.cross);
    ctx.artifact("solution_summary.csv", [&](std::ostream& o) { write_summary(s, o); });
    ctx.artifact("value.csv", [&](std::ostream& o) { write_value_csv(u, o); });
}

std::vector<std::size_t> histogram(const std::vector<std::size_t>& stops, std::size_t steps) {
    std::vector<std::size_t> h(steps + 1, 0);
    for (std::size_t s : stops) ++h[s];
    return h;
}

void scenario_game(Context& ctx, bool zero) {
    ctx.result.anchor = "saddle point J(u*, tau*; v, sigma) <= J(u*, tau*; v*, sigma*) <= J(u, tau; v*, sigma*) "
                        "with Y*_0 = J(u*, tau*; v*, sigma*)";
    ExperimentConfig c = ctx.cfg;
    if (zero) {
        c.game.name = "zero";
        c.game.perturb_stopping = false;  // any stop pays a nonzero barrier
        c.game.perturb_controls = true;
    }
    const GameSpec g = make_game(c);
    const auto ens = simulate(c);
    const auto sol = solve_game_bsde(g, ens, make_basis(c.solver), make_solver_options(c.solver));
    const auto times = saddle_stopping_times(sol.sol, g.barriers, ens, c.game.hit_tol);
    const auto star = star_profile(sol, times);
    SaddleCheckOptions opts;
    opts.perturbations = c.game.perturbations;
    opts.seed = c.seed;
    opts.perturb_controls = c.game.perturb_controls;
    opts.perturb_stopping = c.game.perturb_stopping;
    opts.se_multiple = c.tolerances.se_multiple;
    opts.form = c.game.payoff == "literal" ? PayoffForm::literal : PayoffForm::standard;
    const auto rep = verify_saddle(g, ens, sol, star, opts);

    std::vector<double> probe_states;
    for (std::size_t m = 0; m < std::min<std::size_t>(ens.paths(), 64); ++m)
        for (std::size_t node : {std::size_t{0}, c.grid.steps / 2, c.grid.steps}) probe_states.push_back(ens.state(m, node)[0]);
    const double probe_times[] = {0.0, c.grid.horizon};
    const auto spec_check = check_game_spec(g, probe_times, probe_states);

    auto& m = ctx.result.metrics;
    m["Y0"] = rep.y0;
    m["SE"] = sol.sol.y0_se;
    m["J_star"] = rep.J_star;
    m["J_star_SE"] = rep.se_star;
    m["isaacs_gap_max"] = sol.isaacs_gap_max;
    m["theta_bound"] = sol.theta_bound;
    m["violations_lower"] = rep.violations_lower;
    m["violations_upper"] = rep.violations_upper;
    m["max_growth_ratio"] = spec_check.max_growth_ratio;
    m["max_inv_vol"] = spec_check.max_inv_vol;

    ctx.equals("maximizer deviations above J* + 3 SE", static_cast<double>(rep.violations_lower), 0.0);
    ctx.equals("minimizer deviations below J* - 3 SE", static_cast<double>(rep.violations_upper), 0.0);
    ctx.at_most("|J* - Y0|", rep.identity_gap, c.tolerances.se_multiple * rep.se_star + c.tolerances.identity);
    ctx.at_least("declared growth and inverse-volatility constants hold",
                 spec_check.growth_ok && spec_check.inv_vol_ok ? 1.0 : 0.0, 1.0);
    if (zero) {
        double worst = std::abs(rep.J_star);
        for (const auto* side : {&rep.lower, &rep.upper})
            for (const auto& r : *side) worst = std::max(worst, std::abs(r.J));
        ctx.at_most("max |payoff| in the zero game", worst, c.tolerances.zero);
    }

    nlohmann::ordered_json report = {{"Y0", rep.y0},
                                     {"J_star", rep.J_star},
                                     {"SE", rep.se_star},
                                     {"isaacs_gap_max", sol.isaacs_gap_max},
                                     {"violations_lower", rep.violations_lower},
                                     {"violations_upper", rep.violations_upper},
                                     {"tau_hist", histogram(times.tau, c.grid.steps)},
                                     {"sigma_hist", histogram(times.sigma, c.grid.steps)}};
    ctx.artifact("game_report.json", [&](std::ostream& o) { o << report.dump(2) << '\n'; });
    ctx.artifact("perturbations.csv", [&](std::ostream& o) {
        o << "side,description,J,SE,violation\n";
        for (const auto& r : rep.lower) o << "maximizer," << r.description << ',' << r.J << ',' << r.se << ',' << r.violation << '\n';
        for (const auto& r : rep.upper) o << "minimizer," << r.description << ',' << r.J << ',' << r.se << ',' << r.violation << '\n';
    });
}

}  // namespace

ScenarioResult run_scenario(const ExperimentConfig& cfg, bool write_artifacts) {
    cfg.validate();
    ScenarioResult result;
    result.scenario = cfg.scenario;
    Context ctx(cfg, result, write_artifacts);
    const auto start = std::chrono::steady_clock::now();
    const std::string& s = cfg.scenario;
    if (s == "bsde") scenario_bsde(ctx);
    else if (s == "log-ode") scenario_log_ode(ctx);
    else if (s == "zero-solution") scenario_zero_solution(ctx);
    else if (s == "penalized") scenario_penalized(ctx);
    else if (s == "double-barrier") scenario_double_barrier(ctx);
    else if (s == "pde") scenario_pde(ctx);
    else if (s == "cross-validate") scenario_cross_validate(ctx);
    else if (s == "game") scenario_game(ctx, false);
    else if (s == "zero-game") scenario_game(ctx, true);
    else throw ConfigError("experiment.scenario", "unknown scenario '" + s + "'");
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

void emit_report(const ScenarioResult& result, const ExperimentConfig& cfg, const fs::path& dir) {
    nlohmann::ordered_json j;
    j["scenario"] = result.scenario;
    j["anchor"] = result.anchor;
    j["seed"] = cfg.seed;
    j["passed"] = result.passed();
    j["metrics"] = result.metrics;
    auto checks = nlohmann::ordered_json::array();
    for (const auto& c : result.checks)
        checks.push_back({{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"limit", c.limit},
                          {"passed", c.passed}});
    j["checks"] = checks;
    j["artifacts"] = result.artifacts;
    j["config"] = cfg.flatten();
    fs::create_directories(dir);
    std::ofstream out(dir / "results.json");
    if (!out) throw Error("cannot write " + (dir / "results.json").string());
    out << j.dump(2) << '\n';
}

int run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
    const auto result = run_scenario(cfg, true);
    emit_report(result, cfg, cfg.out);
    if (log) {
        for (const auto& c : result.checks)
            *log << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.value << ' ' << c.relation << ' ' << c.limit
                 << '\n';
        *log << result.scenario << ": " << (result.passed() ? "passed" : "FAILED") << " in " << std::fixed
             << std::setprecision(2) << result.seconds << " s, report " << (fs::path(cfg.out) / "results.json").string()
             << '\n';
        log->unsetf(std::ios::floatfield);
    }
    return result.passed() ? 0 : 1;
}

ConvergenceTable convergence_study(const ExperimentConfig& cfg, const std::string& axis, std::size_t levels) {
    cfg.validate();
    require(levels >= 1, "convergence_study: need at least one level");
    const bool pde_metric = cfg.scenario == "pde" || axis == "nx";
    ConvergenceTable table{axis, pde_metric ? "u00" : "Y0", {}};
    auto metric_of = [&](const ScenarioResult& r) {
        if (!r.metrics.contains(table.metric))
            throw ConfigError("experiment.scenario", "scenario '" + cfg.scenario + "' does not report " + table.metric);
        return r.metrics[table.metric].get<double>();
    };
    auto se_of = [&](const ScenarioResult& r) { return pde_metric || !r.metrics.contains("SE") ? 0.0 : r.metrics["SE"].get<double>(); };

    if (axis == "penalty") {
        if (cfg.scenario != "penalized") throw ConfigError("experiment.scenario", "the penalty axis needs the penalized scenario");
        const auto r = run_scenario(cfg, false);
        for (const auto& l : r.metrics["levels"])
            table.rows.push_back({l["n"].get<double>(), l["Y0"].get<double>(), l["SE"].get<double>(), 0.0});
    } else {
        if (axis != "N" && axis != "M" && axis != "nx") throw ConfigError("axis", "expected N, M, nx or penalty");
        if (axis == "nx" && cfg.scenario != "pde" && cfg.scenario != "cross-validate")
            throw ConfigError("experiment.scenario", "the nx axis needs the pde or cross-validate scenario");
        for (std::size_t k = 0; k < levels; ++k) {
            ExperimentConfig c = cfg;
            const std::size_t f = std::size_t{1} << k;
            double value = 0.0;
            if (axis == "N") value = static_cast<double>(c.grid.steps *= f);
            if (axis == "M") value = static_cast<double>(c.grid.paths *= f);
            if (axis == "nx") value = static_cast<double>(c.grid.nx = (c.grid.nx - 1) * f + 1);
            const auto r = run_scenario(c, false);
            table.rows.push_back({value, metric_of(r), se_of(r), 0.0});
        }
    }
    for (std::size_t k = 1; k < table.rows.size(); ++k)
        table.rows[k].delta_vs_previous = table.rows[k].metric - table.rows[k - 1].metric;
    return table;
}

void write_convergence_table(const ConvergenceTable& table, std::ostream& out) {
    const auto precision = out.precision(17);
    out << table.axis << ',' << table.metric << ",SE,delta_vs_previous\n";
    for (const auto& r : table.rows) out << r.value << ',' << r.metric << ',' << r.se << ',' << r.delta_vs_previous << '\n';
    out.precision(precision);
}

}  // namespace rbsde::harness
