#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "rbsde/harness/experiment.hpp"
#include "rbsde/obstacle_pde.hpp"

namespace {

using namespace rbsde::harness;

enum Exit { ok = 0, check_failed = 1, usage = 2, numerical = 3 };

struct Command {
    std::string name;
    std::string help;
    std::vector<std::string> scenarios;  // first one is the default
};

const std::vector<Command> kCommands = {
    {"solve-bsde", "Solve a BSDE (unconstrained, log-ode, zero-solution or double-barrier scenario)",
     {"bsde", "log-ode", "zero-solution", "double-barrier"}},
    {"solve-pde", "Solve the double-obstacle problem by finite differences", {"pde"}},
    {"cross-validate", "Compare the LSMC solution with the finite-difference value", {"cross-validate"}},
    {"penalize", "Run a penalization schedule and tabulate its convergence", {"penalized"}},
    {"game", "Solve the mixed game and verify the saddle inequalities", {"game", "zero-game"}},
    {"converge", "Rerun a scenario along one axis (N, M, nx or penalty)", {}},
};

int converge(const ExperimentConfig& cfg, const std::string& axis, std::size_t levels, bool quiet) {
    const auto table = convergence_study(cfg, axis, levels);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out);
    const auto csv = fs::path(cfg.out) / ("converge_" + axis + ".csv");
    {
        std::ofstream out(csv);
        write_convergence_table(table, out);
    }
    std::vector<std::string> artifacts = {csv.filename().string()};
    if (table.metric == "u00" && (axis == "nx" || axis == "N")) {
        std::vector<rbsde::PdeConvergenceRow> rows;
        for (const auto& r : table.rows) {
            const auto nx = axis == "nx" ? static_cast<std::size_t>(r.value) : cfg.grid.nx;
            const auto steps = axis == "N" ? static_cast<std::size_t>(r.value) : cfg.grid.steps;
            rows.push_back({nx, steps, r.metric, r.delta_vs_previous});
        }
        std::ofstream out(fs::path(cfg.out) / "pde_convergence.csv");
        rbsde::write_pde_convergence_csv(rows, out);
        artifacts.push_back("pde_convergence.csv");
    }
    nlohmann::ordered_json j;
    j["scenario"] = "converge";
    j["base_scenario"] = cfg.scenario;
    j["axis"] = axis;
    j["metric"] = table.metric;
    j["seed"] = cfg.seed;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"value", r.value}, {table.metric, r.metric}, {"SE", r.se}, {"delta_vs_previous", r.delta_vs_previous}});
    j["rows"] = rows;
    j["artifacts"] = artifacts;
    j["config"] = cfg.flatten();
    std::ofstream(fs::path(cfg.out) / "results.json") << j.dump(2) << '\n';
    if (!quiet) write_convergence_table(table, std::cout);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Doubly reflected BSDE laboratory: LSMC solvers, obstacle PDE oracle and mixed games"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, axis;
    std::uint64_t seed = 0;
    std::size_t levels = 4;
    bool quiet = false;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Top-level random seed (overrides experiment.seed)");
    app.add_option("--out", out_dir, "Output directory (overrides experiment.out)");
    app.add_option("--set", overrides, "Override one key, e.g. --set grid.steps=100");
    app.add_flag("--quiet", quiet, "Only report through the exit status and results.json");

    std::map<std::string, CLI::App*> subs;
    for (const auto& c : kCommands) subs[c.name] = app.add_subcommand(c.name, c.help);
    subs["converge"]->add_option("--axis", axis, "Axis to refine")->required()->check(CLI::IsMember({"N", "M", "nx", "penalty"}));
    subs["converge"]->add_option("--levels", levels, "Number of refinement levels")->check(CLI::Range(1, 12));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : usage;
    }

    const Command* cmd = nullptr;
    for (const auto& c : kCommands)
        if (subs[c.name]->parsed()) cmd = &c;

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError(o, "expected section.key=value");
            set_field(cfg, o.substr(0, eq), o.substr(eq + 1));
        }
        if (*seed_opt) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out = out_dir;
        if (!cmd->scenarios.empty()) {
            if (cfg.scenario.empty()) cfg.scenario = cmd->scenarios.front();
            if (std::find(cmd->scenarios.begin(), cmd->scenarios.end(), cfg.scenario) == cmd->scenarios.end())
                throw ConfigError("experiment.scenario",
                                  "scenario '" + cfg.scenario + "' does not belong to '" + cmd->name + "'");
        }
        cfg.validate();
        if (cmd->name == "converge") return converge(cfg, axis, levels, quiet);
        return run_experiment(cfg, quiet ? nullptr : &std::cout);
    } catch (const rbsde::InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const rbsde::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numerical;
    }
}
