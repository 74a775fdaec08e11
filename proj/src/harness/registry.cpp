#include "rbsde/harness/registry.hpp"

#include <algorithm>
#include <cmath>

namespace rbsde::harness {

GeneratorSpec make_generator(const GeneratorConfig& cfg) {
    if (cfg.name == "zero") return zero_generator();
    if (cfg.name == "constant") return constant_generator(cfg.c);
    if (cfg.name == "neg_y_log_y") return neg_y_log_y(cfg.K);
    if (cfg.name == "z_sqrt_log") return z_sqrt_log(cfg.c);
    if (cfg.name == "linear") return linear_generator(cfg.a, cfg.b);
    throw ConfigError("generator.name", "unknown generator '" + cfg.name + "'");
}

BarrierPair make_barriers(const BarrierConfig& cfg) {
    if (cfg.name == "const_barrier") return constant_barriers(cfg.lower, cfg.upper);
    if (cfg.name == "lower_only") return constant_barriers(cfg.lower, kInf);
    if (cfg.name == "upper_only") return constant_barriers(-kInf, cfg.upper);
    if (cfg.name == "none") return no_barriers();
    throw ConfigError("barrier.name", "unknown barrier '" + cfg.name + "'");
}

TerminalCondition make_terminal(const TerminalConfig& cfg) {
    if (cfg.name == "clamp_terminal") return clamp_terminal(cfg.lo, cfg.hi, cfg.scale);
    if (cfg.name == "constant") return constant_terminal(cfg.value);
    if (cfg.name == "identity")
        return {"identity", [s = cfg.scale](std::span<const double> x) { return s * x[0]; }};
    throw ConfigError("terminal.name", "unknown terminal condition '" + cfg.name + "'");
}

SdeSpec make_sde(const SdeConfig& cfg) {
    if (cfg.name == "brownian") {
        SdeSpec s = brownian_sde(cfg.dim, std::vector<double>(cfg.dim, cfg.x0), cfg.vol);
        s.drift_value.assign(cfg.dim, cfg.drift);
        return s;
    }
    if (cfg.name == "constant") return constant_sde(cfg.x0, cfg.drift, cfg.vol);
    throw ConfigError("sde.name", "unknown SDE '" + cfg.name + "'");
}

RegressionBasis make_basis(const SolverConfig& cfg) {
    return cfg.basis == "bins" ? RegressionBasis::piecewise_constant(cfg.bins) : RegressionBasis::polynomial(cfg.degree);
}

SolverOptions make_solver_options(const SolverConfig& cfg) {
    SolverOptions o;
    o.y_cap = cfg.y_cap;
    o.check_generator = cfg.check_generator;
    return o;
}

PdeSpec make_pde_spec(const ExperimentConfig& cfg) {
    if (cfg.sde.dim != 1) throw ConfigError("sde.dim", "the finite-difference solver is one-dimensional");
    PdeSpec p;
    p.vol = [s = cfg.sde.vol](double, double) { return s; };
    if (cfg.sde.drift != 0.0) p.drift = [b = cfg.sde.drift](double, double) { return b; };
    const GeneratorSpec gen = make_generator(cfg.generator);
    if (cfg.generator.name != "zero") {
        p.driver = [f = gen.driver](double t, double x, double u, double z) {
            const double xs[] = {x}, zs[] = {z};
            return f(t, xs, u, zs);
        };
    }
    const BarrierPair b = make_barriers(cfg.barrier);
    const double lo = b.lower_at(0.0, std::span<const double>{}), hi = b.upper_at(0.0, std::span<const double>{});
    if (std::isfinite(lo)) p.lower = [lo](double, double) { return lo; };
    if (std::isfinite(hi)) p.upper = [hi](double, double) { return hi; };
    p.terminal = [xi = make_terminal(cfg.terminal)](double x) {
        const double xs[] = {x};
        return xi(xs);
    };
    return p;
}

SpaceGrid make_space_grid(const ExperimentConfig& cfg) {
    if (cfg.grid.x_min == 0.0 && cfg.grid.x_max == 0.0) {
        const double half = std::max(6.0 * cfg.sde.vol * std::sqrt(cfg.grid.horizon) +
                                         std::abs(cfg.sde.drift) * cfg.grid.horizon,
                                     1.0);
        return SpaceGrid(cfg.sde.x0 - half, cfg.sde.x0 + half, cfg.grid.nx);
    }
    return SpaceGrid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.nx);
}

PdeOptions make_pde_options(const PdeConfig& cfg) {
    PdeOptions o;
    o.theta = cfg.theta;
    o.method = cfg.method == "splitting" ? ViMethod::splitting : ViMethod::psor;
    o.omega = cfg.omega;
    o.tol = cfg.tol;
    return o;
}

namespace {

PartialDrift identity_drift() {
    return [](double, std::span<const double>, double c, std::span<double> out) { out[0] = c; };
}

PartialReward square_reward(double a) {
    return [a](double, std::span<const double>, double c) { return a * c * c; };
}

}  // namespace

GameSpec make_game(const ExperimentConfig& cfg) {
    if (cfg.sde.dim != 1) throw ConfigError("sde.dim", "the built-in games are one-dimensional");
    if (cfg.sde.vol == 0.0) throw ConfigError("sde.vol", "games need an invertible volatility");
    const SdeSpec sde = make_sde(cfg.sde);
    if (cfg.game.name == "test") {
        const std::vector<double> grid = {-0.5, -0.25, 0.0, 0.25, 0.5};
        BarrierPair band{[](double, std::span<const double> x) { return -0.6 + 0.5 * x[0]; },
                         [](double, std::span<const double> x) { return 0.6 + 0.5 * x[0]; }};
        TerminalCondition xi{"clamp_band", [](std::span<const double> x) {
                                 return std::clamp(x[0], -0.6 + 0.5 * x[0], 0.6 + 0.5 * x[0]);
                             }};
        GameSpec g = separable_game(sde, identity_drift(), square_reward(1.0), identity_drift(), square_reward(-0.5),
                                    grid, grid, std::move(band), std::move(xi));
        g.growth_K = 1.5;
        g.inv_vol_C = 1.0 / cfg.sde.vol;
        return g;
    }
    if (cfg.game.name == "example") {
        const std::vector<double> grid = {-1.0, 0.0, 1.0};
        GameSpec g = separable_game(sde, identity_drift(), square_reward(-1.0), identity_drift(), square_reward(1.0),
                                    grid, grid, make_barriers(cfg.barrier), make_terminal(cfg.terminal));
        g.growth_K = 3.0;
        g.inv_vol_C = 1.0 / cfg.sde.vol;
        return g;
    }
    if (cfg.game.name == "zero") {
        GameSpec g;
        g.sde = sde;
        g.ugrid = {-1.0, 0.0, 1.0};
        g.vgrid = {-1.0, 0.0, 1.0};
        g.phi = [](double, std::span<const double>, double, double, std::span<double> out) { out[0] = 0.0; };
        g.h_run = [](double, std::span<const double>, double, double) { return 0.0; };
        g.barriers = make_barriers(cfg.barrier);
        g.xi = constant_terminal(0.0);
        g.inv_vol_C = 1.0 / cfg.sde.vol;
        return g;
    }
    throw ConfigError("game.name", "unknown game '" + cfg.game.name + "'");
}

}  // namespace rbsde::harness
