#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rbsde/barriers.hpp"
#include "rbsde/bsde.hpp"
#include "rbsde/forward_sde.hpp"
#include "rbsde/regression.hpp"
#include "rbsde/solution.hpp"

namespace rbsde {

/// phi(t, x, u, v), d entries written to `out`.
using ControlDrift = std::function<void(double t, std::span<const double> x, double u, double v, std::span<double> out)>;
/// h(t, x, u, v).
using RunningReward = std::function<double(double t, std::span<const double> x, double u, double v)>;
/// One player's part of a separable game: phi_u(t, x, u) into `out` / h_u(t, x, u).
using PartialDrift = std::function<void(double t, std::span<const double> x, double c, std::span<double> out)>;
using PartialReward = std::function<double(double t, std::span<const double> x, double c)>;

/// Mixed zero-sum game: the minimizer picks (u, tau), the maximizer (v, sigma). Either give
/// phi and h_run directly, or give the separable parts phi = phi_u + phi_v, h = h_u + h_v, in
/// which case the Hamiltonian is evaluated as A(u) + B(v) and Isaacs' condition holds exactly.
struct GameSpec {
    SdeSpec sde;
    ControlDrift phi;
    RunningReward h_run;
    PartialDrift phi_u, phi_v;
    PartialReward h_u, h_v;
    std::vector<double> ugrid;
    std::vector<double> vgrid;
    BarrierPair barriers;
    TerminalCondition xi;
    /// Declared constants: |h| + |phi| <= K (1 + |x|) and |sigma^{-1}| <= C.
    double growth_K = 0.0;
    double inv_vol_C = 0.0;

    bool separable() const;
    void validate() const;
    void drift(double t, std::span<const double> x, double u, double v, std::span<double> out) const;
    double reward(double t, std::span<const double> x, double u, double v) const;
};

/// Game with separable drift and reward; missing parts are zero.
GameSpec separable_game(SdeSpec sde, PartialDrift phi_u, PartialReward h_u, PartialDrift phi_v, PartialReward h_v,
                        std::vector<double> ugrid, std::vector<double> vgrid, BarrierPair barriers,
                        TerminalCondition xi);

struct SaddleResult {
    double hstar = 0.0;   ///< inf_u sup_v H
    double supinf = 0.0;  ///< sup_v inf_u H
    double gap = 0.0;     ///< hstar - supinf (>= 0)
    std::size_t u_index = 0, v_index = 0;
    double ustar = 0.0, vstar = 0.0;
};

/// sigma^{-1}(t, x) phi(t, x, u, v) at one state for every control pair, row-major [u][v][k].
std::vector<double> girsanov_kernel(const GameSpec& spec, double t, std::span<const double> x);

/// Exhaustive search of H = z sigma^{-1} phi + h over Ugrid x Vgrid. Ties go to the lowest index.
SaddleResult hamiltonian_saddle(const GameSpec& spec, double t, std::span<const double> x, std::span<const double> z);

/// Driver (t, x, y, z) -> H*(t, x, z) with a log-growth envelope sized by `theta_bound`, a
/// bound on |sigma^{-1} phi| over the states the driver will see.
GeneratorSpec game_generator(const GameSpec& spec, double theta_bound);

/// Controls per path and step, node-major like PathField.
struct StrategyProfile {
    PathField u;
    PathField v;
    std::vector<std::size_t> tau;
    std::vector<std::size_t> sigma;
};

struct GameSolution {
    SolutionQuadruple sol;
    /// u*(t_i, X_i, Z_i) and v*(t_i, X_i, Z_i) on every path and step.
    PathField u_star;
    PathField v_star;
    double isaacs_gap_max = 0.0;
    double theta_bound = 0.0;
};

/// Doubly reflected BSDE with driver H*, solved by the direct projection scheme.
GameSolution solve_game_bsde(const GameSpec& spec, const PathEnsemble& ens, const RegressionBasis& basis,
                             const SolverOptions& opts = {});

struct StoppingTimes {
    std::vector<std::size_t> tau;    ///< first node with Y >= U - tol (minimizer stops)
    std::vector<std::size_t> sigma;  ///< first node with Y <= L + tol (maximizer stops)
};

/// First hitting nodes of the barriers; `tol_hit` is relative to the band width U - L
/// (absolute when one barrier is infinite). Paths that never hit stop at N.
StoppingTimes saddle_stopping_times(const SolutionQuadruple& sol, const BarrierPair& barriers, const PathEnsemble& ens,
                                    double tol_hit = 1e-6);

StrategyProfile star_profile(const GameSolution& game, const StoppingTimes& times);

struct GirsanovWeights {
    /// Cumulative log density on every path and node (node-major).
    PathField log_weight;
    /// exp(log density at T) per path.
    std::vector<double> weights;
    double mean = 0.0;
    double se = 0.0;
    /// Paths whose log density exceeded the overflow guard; their weights are +inf.
    std::vector<std::size_t> overflow_paths;
};

/// Discrete stochastic exponential exp(sum theta_i dB_i - 1/2 sum |theta_i|^2 dt) with
/// theta_i = sigma^{-1} phi(t_i, X_i, u_i, v_i).
GirsanovWeights girsanov_weight(const GameSpec& spec, const PathEnsemble& ens, const PathField& u, const PathField& v);

enum class PayoffForm {
    /// L_sigma 1{sigma <= tau, sigma < T} + U_tau 1{tau < sigma} + xi 1{tau = sigma = T}.
    standard,
    /// L_sigma 1{sigma <= tau < T} + U_tau 1{tau < sigma} + xi 1{tau ^ sigma = T}, which pays
    /// nothing when sigma < tau = T.
    literal
};

struct PayoffEstimate {
    double J = 0.0;
    double se = 0.0;
    /// Weighted payoff per path.
    std::vector<double> samples;
};

/// Girsanov-weighted Monte Carlo estimate of the game payoff; the density is taken at tau ^ sigma.
PayoffEstimate payoff_estimate(const GameSpec& spec, const PathEnsemble& ens, const StrategyProfile& profile,
                               PayoffForm form = PayoffForm::standard);

struct SaddleCheckOptions {
    std::size_t perturbations = 10;
    std::uint64_t seed = 0;
    bool perturb_controls = true;
    bool perturb_stopping = true;
    /// Violation threshold in combined standard errors.
    double se_multiple = 3.0;
    PayoffForm form = PayoffForm::standard;
};

struct PerturbationResult {
    std::string description;
    double J = 0.0;
    double se = 0.0;
    bool violation = false;
};

struct SaddleReport {
    double y0 = 0.0;
    double J_star = 0.0;
    double se_star = 0.0;
    double identity_gap = 0.0;  ///< |J* - Y0|
    /// Deviations of the maximizer (v, sigma) against (u*, tau*): J <= J* expected.
    std::vector<PerturbationResult> lower;
    /// Deviations of the minimizer (u, tau) against (v*, sigma*): J >= J* expected.
    std::vector<PerturbationResult> upper;
    std::size_t violations_lower = 0;
    std::size_t violations_upper = 0;
};

SaddleReport verify_saddle(const GameSpec& spec, const PathEnsemble& ens, const GameSolution& game,
                           const StrategyProfile& star, const SaddleCheckOptions& opts = {});

struct GameSpecCheck {
    double max_growth_ratio = 0.0;   ///< max (|h| + |phi|) / (1 + |x|)
    double max_inv_vol = 0.0;        ///< max |sigma^{-1}| (Frobenius)
    bool growth_ok = true;
    bool inv_vol_ok = true;
};

/// Spot-checks the declared growth and inverse-volatility constants at the given states
/// ([sample][component]) and times.
GameSpecCheck check_game_spec(const GameSpec& spec, std::span<const double> times, std::span<const double> states);

}  // namespace rbsde
