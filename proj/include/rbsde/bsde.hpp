#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "rbsde/barriers.hpp"
#include "rbsde/forward_sde.hpp"
#include "rbsde/generator.hpp"
#include "rbsde/regression.hpp"
#include "rbsde/solution.hpp"

namespace rbsde {

struct SolverOptions {
    /// |Y| above this aborts the recursion.
    double y_cap = 1e8;
    /// Run check_log_growth on a probe set before solving.
    bool check_generator = true;
};

/// Increasing penalty weights n.
struct PenalizationSchedule {
    std::vector<double> levels;

    /// 2^0, 2^1, ..., 2^max_exponent.
    static PenalizationSchedule powers_of_two(int max_exponent = 10);
    void validate() const;
};

/// Which solutions a penalized run keeps in memory; summaries are always kept.
enum class Retain { all, last };

struct LevelSummary {
    double n = 0.0;
    double y0 = 0.0;
    double se = 0.0;
    /// max over paths and nodes of (L - Y)^+ and (Y - U)^+.
    double sup_residual_lower = 0.0;
    double sup_residual_upper = 0.0;
    double kplus_T_mean = 0.0;
    double kminus_T_mean = 0.0;
};

struct PenalizedRun {
    std::vector<LevelSummary> levels;
    /// One solution per level, or only the last one under Retain::last.
    std::vector<SolutionQuadruple> solutions;
};

enum class PenaltyDirection {
    increasing,  ///< penalize the lower barrier, project onto the upper one
    decreasing   ///< penalize the upper barrier, project onto the lower one
};

/// Explicit LSMC recursion Y_i = E[Y_{i+1} | X_i] + f(t_i, X_i, Y_i°, Z_i) dt with
/// Z_i = E[Y_{i+1} dB_i | X_i] / dt and Y_N = xi. K+ = K- = 0.
SolutionQuadruple solve_bsde(const GeneratorSpec& gen, const TerminalCondition& xi, const PathEnsemble& ens,
                             const RegressionBasis& basis, const SolverOptions& opts = {});

/// Penalized equations with driver f + n (L - y)^+ for every n of the schedule. Kplus holds
/// the cumulative penalty pushes.
PenalizedRun solve_one_barrier_penalized(const GeneratorSpec& gen, const TerminalCondition& xi,
                                         const StateFunction& lower, const PathEnsemble& ens,
                                         const RegressionBasis& basis, const PenalizationSchedule& sched,
                                         const SolverOptions& opts = {}, Retain retain = Retain::all);

PenalizedRun solve_double_barrier_penalized(const GeneratorSpec& gen, const TerminalCondition& xi,
                                            const BarrierPair& barriers, const PathEnsemble& ens,
                                            const RegressionBasis& basis, const PenalizationSchedule& sched,
                                            PenaltyDirection direction, const SolverOptions& opts = {},
                                            Retain retain = Retain::all);

/// Unconstrained step followed by Y = clamp(Y, L, U); the clipped amounts are the K
/// increments, so the discrete flat-off conditions hold exactly.
SolutionQuadruple solve_double_barrier_direct(const GeneratorSpec& gen, const TerminalCondition& xi,
                                              const BarrierPair& barriers, const PathEnsemble& ens,
                                              const RegressionBasis& basis, const SolverOptions& opts = {});

/// Columns n, Y0, SE, sup_residual_lower, sup_residual_upper, Kplus_T_mean, Kminus_T_mean.
void write_convergence_csv(const PenalizedRun& run, std::ostream& out);

struct SkorokhodReport {
    /// Per path sum_i (Y_i - L_i) dK+_i and sum_i (U_i - Y_i) dK-_i.
    std::vector<double> residual_lower;
    std::vector<double> residual_upper;
    /// Paths where a residual exceeds tol (1 + K_T) or K decreases or K_0 != 0.
    std::vector<std::size_t> failing_paths;
    double max_scaled_residual = 0.0;

    bool passed() const { return failing_paths.empty(); }
};

SkorokhodReport check_skorokhod(const SolutionQuadruple& sol, const BarrierPair& barriers, const PathEnsemble& ens,
                                double tol);

/// Barrier values along every path, node-major like PathField.
struct BarrierPaths {
    PathField lower;
    PathField upper;
};
BarrierPaths evaluate_barriers(const BarrierPair& barriers, const PathEnsemble& ens);

}  // namespace rbsde
