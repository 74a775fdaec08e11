#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>

#include "rbsde/error.hpp"

namespace rbsde::harness {

/// Bad or unknown configuration field. `field` is the "section.key" path.
class ConfigError : public InvalidArgument {
public:
    ConfigError(std::string field, const std::string& what)
        : InvalidArgument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct GridConfig {
    double horizon = 1.0;
    std::size_t steps = 50;
    std::size_t paths = 10000;
    std::size_t nx = 401;
    /// Space domain of the finite-difference grid; when both are zero it is x0 +- 6 vol sqrt(T).
    double x_min = 0.0;
    double x_max = 0.0;
};

struct SdeConfig {
    std::string name = "brownian";  ///< brownian | constant
    std::size_t dim = 1;
    double x0 = 0.0;
    double drift = 0.0;
    double vol = 1.0;
};

struct GeneratorConfig {
    std::string name = "zero";  ///< zero | constant | neg_y_log_y | z_sqrt_log | linear
    double K = 1.0;
    double c = 0.0;
    double a = 0.0;
    double b = 0.0;
};

struct BarrierConfig {
    std::string name = "const_barrier";  ///< const_barrier | lower_only | upper_only | none
    double lower = -1.0;
    double upper = 1.0;
};

struct TerminalConfig {
    std::string name = "clamp_terminal";  ///< clamp_terminal | constant | identity
    double lo = -1.0;
    double hi = 1.0;
    double scale = 1.0;
    double value = 0.0;
};

struct SolverConfig {
    std::string scheme = "direct";  ///< direct | increasing | decreasing | one_barrier | unconstrained
    std::string basis = "polynomial";  ///< polynomial | bins
    std::size_t degree = 3;
    std::size_t bins = 16;
    int penalty_max_exponent = 10;
    double y_cap = 1e8;
    bool check_generator = true;
};

struct PdeConfig {
    double theta = 1.0;
    std::string method = "psor";  ///< psor | splitting
    double omega = 1.5;
    double tol = 1e-12;
};

struct GameConfig {
    std::string name = "test";  ///< test | example | zero
    std::size_t perturbations = 10;
    bool perturb_controls = true;
    bool perturb_stopping = true;
    double hit_tol = 1e-6;
    std::string payoff = "standard";  ///< standard | literal
};

struct ToleranceConfig {
    double y0 = 5e-3;           ///< closed-form and expected-value checks
    double zero = 1e-10;        ///< zero-solution checks
    double sup_residual = 0.02; ///< final-level penalization residual
    double skorokhod = 1e-8;    ///< flat-off residual per path, scaled by 1 + K_T
    double complementarity = 1e-8;
    double cross = 0.03;        ///< LSMC against finite differences
    double identity = 0.03;     ///< |J* - Y0| beyond 3 SE
    double se_multiple = 3.0;
};

struct DiagnosticsSection {
    double lambda = 1.0;
    double p = 1.5;
    /// Optional reference value for Y0 in the bsde scenario; NaN ("none" in a file) disables the check.
    double expected_y0 = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentConfig {
    /// Empty means "not chosen"; the CLI fills in its subcommand's default.
    std::string scenario;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::size_t workers = 1;
    GridConfig grid;
    SdeConfig sde;
    GeneratorConfig generator;
    BarrierConfig barrier;
    TerminalConfig terminal;
    SolverConfig solver;
    PdeConfig pde;
    GameConfig game;
    ToleranceConfig tolerances;
    DiagnosticsSection diagnostics;

    /// Range and registry checks; throws ConfigError naming the field.
    void validate() const;
    /// Every key with its current value, as written in a config file.
    std::map<std::string, std::string> flatten() const;
};

/// Reads an INI file ([section] and key = value lines). Unknown sections or keys are errors.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
/// Applies one "section.key" = value assignment.
void set_field(ExperimentConfig& cfg, const std::string& path, const std::string& value);

/// Known scenario names.
bool is_scenario(const std::string& name);

}  // namespace rbsde::harness
