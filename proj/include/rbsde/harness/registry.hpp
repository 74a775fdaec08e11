#pragma once

#include "rbsde/barriers.hpp"
#include "rbsde/forward_sde.hpp"
#include "rbsde/game.hpp"
#include "rbsde/generator.hpp"
#include "rbsde/harness/config.hpp"
#include "rbsde/obstacle_pde.hpp"
#include "rbsde/regression.hpp"

namespace rbsde::harness {

// Built-in components selected by name from the config.

GeneratorSpec make_generator(const GeneratorConfig& cfg);
BarrierPair make_barriers(const BarrierConfig& cfg);
TerminalCondition make_terminal(const TerminalConfig& cfg);
SdeSpec make_sde(const SdeConfig& cfg);
RegressionBasis make_basis(const SolverConfig& cfg);
SolverOptions make_solver_options(const SolverConfig& cfg);

/// One-dimensional Markovian counterpart of the configured BSDE problem.
PdeSpec make_pde_spec(const ExperimentConfig& cfg);
SpaceGrid make_space_grid(const ExperimentConfig& cfg);
PdeOptions make_pde_options(const PdeConfig& cfg);

/// Games by name:
///   test:    phi = u + v, h = u^2 - v^2 / 2 on {-0.5, -0.25, 0, 0.25, 0.5}, barriers
///            -0.6 + 0.5 x and 0.6 + 0.5 x, terminal x clamped between them;
///   example: phi = u + v, h = -u^2 + v^2 on {-1, 0, 1} with the configured barriers and terminal;
///   zero:    phi = h = 0, terminal 0, configured barriers.
/// All use the configured one-dimensional SDE.
GameSpec make_game(const ExperimentConfig& cfg);

}  // namespace rbsde::harness
