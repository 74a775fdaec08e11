#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "rbsde/harness/config.hpp"

namespace rbsde::harness {

/// One assertion made by a scenario: value compared against limit.
struct Check {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    std::string relation = "<=";  ///< "<=", ">=" or "=="
    bool passed = false;
};

struct ScenarioResult {
    std::string scenario;
    /// The mathematical statement the scenario exercises.
    std::string anchor;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    std::vector<Check> checks;
    /// Files written under the output directory.
    std::vector<std::string> artifacts;
    double seconds = 0.0;

    bool passed() const;
};

/// Runs the configured scenario. Artifacts go to cfg.out unless `write_artifacts` is false.
ScenarioResult run_scenario(const ExperimentConfig& cfg, bool write_artifacts = true);

/// results.json: scenario, anchor, seed, pass flag, metrics, checks, artifacts and the full config.
void emit_report(const ScenarioResult& result, const ExperimentConfig& cfg, const std::filesystem::path& dir);

/// run_scenario + emit_report + one log line per check. Returns 0 iff every check passed.
int run_experiment(const ExperimentConfig& cfg, std::ostream* log);

struct ConvergenceRow {
    double value = 0.0;
    double metric = 0.0;
    double se = 0.0;
    double delta_vs_previous = 0.0;
};

struct ConvergenceTable {
    std::string axis;    ///< N | M | nx | penalty
    std::string metric;  ///< Y0 or u00
    std::vector<ConvergenceRow> rows;
};

/// Reruns the scenario with the axis doubled `levels - 1` times (N, M, nx) or reads every
/// level of the penalty schedule (penalty).
ConvergenceTable convergence_study(const ExperimentConfig& cfg, const std::string& axis, std::size_t levels = 4);
void write_convergence_table(const ConvergenceTable& table, std::ostream& out);

}  // namespace rbsde::harness
