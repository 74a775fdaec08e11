#include "rbsde/harness/config.hpp"

#include <algorithm>
#include <array>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>
#include <vector>

namespace rbsde::harness {

namespace {

constexpr std::array kScenarios = {"bsde",           "log-ode", "zero-solution", "penalized", "double-barrier", "pde",
                                   "cross-validate", "game",    "zero-game"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_value(const std::string& field, const std::string& raw) {
    const std::string s = trim(raw);
    if constexpr (std::is_same_v<T, std::string>) {
        if (s.empty()) throw ConfigError(field, "empty value");
        return s;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError(field, "expected true or false, got '" + s + "'");
    } else if constexpr (std::is_same_v<T, double>) {
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "none") return std::numeric_limits<double>::quiet_NaN();
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size() || std::isnan(v))
            throw ConfigError(field, "expected a number, got '" + s + "'");
        return v;
    } else {
        T v{};
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
            throw ConfigError(field, "expected an integer, got '" + s + "'");
        return v;
    }
}

template <class T>
std::string format_value(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) return v;
    else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
    else if constexpr (std::is_same_v<T, double>) {
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        if (std::isnan(v)) return "none";
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    } else return std::to_string(v);
}

struct Key {
    std::string path;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class F>
Key key(std::string path, F ref) {
    using T = std::remove_cvref_t<decltype(ref(std::declval<ExperimentConfig&>()))>;
    return {path, [ref, path](ExperimentConfig& c, const std::string& s) { ref(c) = parse_value<T>(path, s); },
            [ref](const ExperimentConfig& c) { return format_value<T>(ref(const_cast<ExperimentConfig&>(c))); }};
}

#define RBSDE_KEY(path, member) key(path, [](ExperimentConfig& c) -> auto& { return c.member; })

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        RBSDE_KEY("experiment.scenario", scenario),
        RBSDE_KEY("experiment.seed", seed),
        RBSDE_KEY("experiment.out", out),
        RBSDE_KEY("experiment.workers", workers),
        RBSDE_KEY("grid.horizon", grid.horizon),
        RBSDE_KEY("grid.steps", grid.steps),
        RBSDE_KEY("grid.paths", grid.paths),
        RBSDE_KEY("grid.nx", grid.nx),
        RBSDE_KEY("grid.x_min", grid.x_min),
        RBSDE_KEY("grid.x_max", grid.x_max),
        RBSDE_KEY("sde.name", sde.name),
        RBSDE_KEY("sde.dim", sde.dim),
        RBSDE_KEY("sde.x0", sde.x0),
        RBSDE_KEY("sde.drift", sde.drift),
        RBSDE_KEY("sde.vol", sde.vol),
        RBSDE_KEY("generator.name", generator.name),
        RBSDE_KEY("generator.K", generator.K),
        RBSDE_KEY("generator.c", generator.c),
        RBSDE_KEY("generator.a", generator.a),
        RBSDE_KEY("generator.b", generator.b),
        RBSDE_KEY("barrier.name", barrier.name),
        RBSDE_KEY("barrier.lower", barrier.lower),
        RBSDE_KEY("barrier.upper", barrier.upper),
        RBSDE_KEY("terminal.name", terminal.name),
        RBSDE_KEY("terminal.lo", terminal.lo),
        RBSDE_KEY("terminal.hi", terminal.hi),
        RBSDE_KEY("terminal.scale", terminal.scale),
        RBSDE_KEY("terminal.value", terminal.value),
        RBSDE_KEY("solver.scheme", solver.scheme),
        RBSDE_KEY("solver.basis", solver.basis),
        RBSDE_KEY("solver.degree", solver.degree),
        RBSDE_KEY("solver.bins", solver.bins),
        RBSDE_KEY("solver.penalty_max_exponent", solver.penalty_max_exponent),
        RBSDE_KEY("solver.y_cap", solver.y_cap),
        RBSDE_KEY("solver.check_generator", solver.check_generator),
        RBSDE_KEY("pde.theta", pde.theta),
        RBSDE_KEY("pde.method", pde.method),
        RBSDE_KEY("pde.omega", pde.omega),
        RBSDE_KEY("pde.tol", pde.tol),
        RBSDE_KEY("game.name", game.name),
        RBSDE_KEY("game.perturbations", game.perturbations),
        RBSDE_KEY("game.perturb_controls", game.perturb_controls),
        RBSDE_KEY("game.perturb_stopping", game.perturb_stopping),
        RBSDE_KEY("game.hit_tol", game.hit_tol),
        RBSDE_KEY("game.payoff", game.payoff),
        RBSDE_KEY("tolerances.y0", tolerances.y0),
        RBSDE_KEY("tolerances.zero", tolerances.zero),
        RBSDE_KEY("tolerances.sup_residual", tolerances.sup_residual),
        RBSDE_KEY("tolerances.skorokhod", tolerances.skorokhod),
        RBSDE_KEY("tolerances.complementarity", tolerances.complementarity),
        RBSDE_KEY("tolerances.cross", tolerances.cross),
        RBSDE_KEY("tolerances.identity", tolerances.identity),
        RBSDE_KEY("tolerances.se_multiple", tolerances.se_multiple),
        RBSDE_KEY("diagnostics.lambda", diagnostics.lambda),
        RBSDE_KEY("diagnostics.p", diagnostics.p),
        RBSDE_KEY("diagnostics.expected_y0", diagnostics.expected_y0),
    };
    return table;
}

#undef RBSDE_KEY

template <std::size_t N>
void require_one_of(const std::string& field, const std::string& value, const std::array<const char*, N>& options) {
    if (std::find(options.begin(), options.end(), value) != options.end()) return;
    std::string list;
    for (const char* o : options) list += (list.empty() ? "" : ", ") + std::string(o);
    throw ConfigError(field, "unknown value '" + value + "' (expected one of " + list + ")");
}

void require_positive(const std::string& field, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be positive and finite");
}

}  // namespace

bool is_scenario(const std::string& name) {
    return std::find(kScenarios.begin(), kScenarios.end(), name) != kScenarios.end();
}

void set_field(ExperimentConfig& cfg, const std::string& path, const std::string& value) {
    for (const auto& k : keys())
        if (k.path == path) {
            k.set(cfg, value);
            return;
        }
    throw ConfigError(path, "unknown config key");
}

std::map<std::string, std::string> ExperimentConfig::flatten() const {
    std::map<std::string, std::string> out;
    for (const auto& k : keys()) out[k.path] = k.get(*this);
    return out;
}

void ExperimentConfig::validate() const {
    if (scenario.empty()) throw ConfigError("experiment.scenario", "no scenario given");
    require_one_of("experiment.scenario", scenario, kScenarios);
    if (out.empty()) throw ConfigError("experiment.out", "empty output directory");
    if (workers == 0) throw ConfigError("experiment.workers", "must be at least 1");
    require_positive("grid.horizon", grid.horizon);
    if (grid.steps == 0) throw ConfigError("grid.steps", "must be a positive integer");
    if (grid.paths == 0) throw ConfigError("grid.paths", "must be a positive integer");
    if (grid.nx < 3) throw ConfigError("grid.nx", "must be at least 3");
    if (!(grid.x_min == 0.0 && grid.x_max == 0.0) && !(grid.x_min < grid.x_max))
        throw ConfigError("grid.x_min", "must be below grid.x_max");
    require_one_of("sde.name", sde.name, std::array{"brownian", "constant"});
    if (sde.dim == 0) throw ConfigError("sde.dim", "must be a positive integer");
    if (sde.name == "constant" && sde.dim != 1) throw ConfigError("sde.dim", "the constant SDE is one-dimensional");
    if (!std::isfinite(sde.x0)) throw ConfigError("sde.x0", "must be finite");
    if (!std::isfinite(sde.drift)) throw ConfigError("sde.drift", "must be finite");
    if (!(sde.vol >= 0.0) || !std::isfinite(sde.vol)) throw ConfigError("sde.vol", "must be nonnegative and finite");
    require_one_of("generator.name", generator.name,
                   std::array{"zero", "constant", "neg_y_log_y", "z_sqrt_log", "linear"});
    for (const auto& [field, v] : {std::pair{"generator.K", generator.K}, std::pair{"generator.c", generator.c},
                                   std::pair{"generator.a", generator.a}, std::pair{"generator.b", generator.b},
                                   std::pair{"terminal.value", terminal.value}, std::pair{"terminal.scale", terminal.scale}})
        if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
    if (std::isnan(terminal.lo) || std::isnan(terminal.hi)) throw ConfigError("terminal.lo", "must not be none");
    require_one_of("barrier.name", barrier.name, std::array{"const_barrier", "lower_only", "upper_only", "none"});
    if (barrier.name == "const_barrier" && !(barrier.lower < barrier.upper))
        throw ConfigError("barrier.lower", "must be strictly below barrier.upper");
    require_one_of("terminal.name", terminal.name, std::array{"clamp_terminal", "constant", "identity"});
    if (terminal.name == "clamp_terminal" && !(terminal.lo <= terminal.hi))
        throw ConfigError("terminal.lo", "must not exceed terminal.hi");
    require_one_of("solver.scheme", solver.scheme,
                   std::array{"direct", "increasing", "decreasing", "one_barrier", "unconstrained"});
    require_one_of("solver.basis", solver.basis, std::array{"polynomial", "bins"});
    if (solver.bins == 0) throw ConfigError("solver.bins", "must be a positive integer");
    if (solver.penalty_max_exponent < 0 || solver.penalty_max_exponent > 40)
        throw ConfigError("solver.penalty_max_exponent", "must lie in 0..40");
    require_positive("solver.y_cap", solver.y_cap);
    if (!(pde.theta >= 0.0 && pde.theta <= 1.0)) throw ConfigError("pde.theta", "must lie in [0, 1]");
    require_one_of("pde.method", pde.method, std::array{"psor", "splitting"});
    if (!(pde.omega > 0.0 && pde.omega < 2.0)) throw ConfigError("pde.omega", "must lie in (0, 2)");
    require_positive("pde.tol", pde.tol);
    require_one_of("game.name", game.name, std::array{"test", "example", "zero"});
    require_one_of("game.payoff", game.payoff, std::array{"standard", "literal"});
    if (!(game.hit_tol >= 0.0)) throw ConfigError("game.hit_tol", "must be nonnegative");
    require_positive("tolerances.y0", tolerances.y0);
    require_positive("tolerances.zero", tolerances.zero);
    require_positive("tolerances.sup_residual", tolerances.sup_residual);
    require_positive("tolerances.skorokhod", tolerances.skorokhod);
    require_positive("tolerances.complementarity", tolerances.complementarity);
    require_positive("tolerances.cross", tolerances.cross);
    require_positive("tolerances.identity", tolerances.identity);
    require_positive("tolerances.se_multiple", tolerances.se_multiple);
    require_positive("diagnostics.lambda", diagnostics.lambda);
    if (!(diagnostics.p > 1.0 && diagnostics.p < 2.0)) throw ConfigError("diagnostics.p", "must lie in (1, 2)");
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(source, e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    ExperimentConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError(section, "key outside of a [section]");
        const bool known = std::any_of(keys().begin(), keys().end(),
                                       [&](const Key& k) { return k.path.starts_with(section + "."); });
        if (!known) throw ConfigError(section, "unknown config section");
        for (const auto& [name, value] : body) set_field(cfg, section + "." + name, value.data());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    return parse_config(in, path);
}

}  // namespace rbsde::harness
