#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "rbsde/time_grid.hpp"

namespace rbsde {

using PdeCoefficient = std::function<double(double t, double x)>;
/// f(t, x, u, z) with z = sigma(t, x) u_x.
using PdeDriver = std::function<double(double t, double x, double u, double z)>;

/// One-dimensional problem
///
///   min[u - h, max{-u_t - L u + r u - f(t, x, u, sigma u_x), u - h'}] = 0,  u(T, .) = g,
///
/// with L = 1/2 sigma^2 d_xx + b d_x. Missing obstacles are infinite, a missing drift or
/// driver is zero.
struct PdeSpec {
    PdeCoefficient drift;
    PdeCoefficient vol;
    PdeDriver driver;
    PdeCoefficient lower;
    PdeCoefficient upper;
    std::function<double(double x)> terminal;
    /// Zeroth-order coefficient r.
    double discount = 0.0;

    double lower_at(double t, double x) const;
    double upper_at(double t, double x) const;
};

/// Uniform nodes x_j = x_min + j dx, j = 0..nx-1; the end nodes carry Dirichlet data.
struct SpaceGrid {
    double x_min = -1.0;
    double x_max = 1.0;
    std::size_t nx = 3;

    SpaceGrid() = default;
    SpaceGrid(double lo, double hi, std::size_t n);
    double dx() const { return (x_max - x_min) / static_cast<double>(nx - 1); }
    double x(std::size_t j) const { return j + 1 == nx ? x_max : x_min + static_cast<double>(j) * dx(); }
    bool operator==(const SpaceGrid&) const = default;
};

/// Tridiagonal rows of the discrete L at one time: (L u)_j = sub_j u_{j-1} + diag_j u_j + super_j u_{j+1}.
/// Central differences for the diffusion, upwind differences for the drift; the boundary rows
/// are zero.
struct TridiagonalOperator {
    std::vector<double> sub, diag, super;

    std::vector<double> apply(std::span<const double> u) const;
};

TridiagonalOperator build_operator(const PdeSpec& spec, const SpaceGrid& space, double t);

enum class ViMethod {
    psor,      ///< projected SOR on the implicit step (exact discrete complementarity)
    splitting  ///< unconstrained implicit step followed by clamping
};

struct PdeOptions {
    /// Implicitness of the diffusion step; theta < 1 requires the explicit part to be monotone.
    double theta = 1.0;
    ViMethod method = ViMethod::psor;
    double omega = 1.5;
    double tol = 1e-12;
    std::size_t max_iter = 200000;
};

/// u(t_i, x_j) on the space-time grid together with the obstacle values.
class GridValueFunction {
public:
    GridValueFunction(const TimeGrid& time, const SpaceGrid& space);

    const TimeGrid& time() const { return time_; }
    const SpaceGrid& space() const { return space_; }

    double& operator()(std::size_t i, std::size_t j) { return u_[i * space_.nx + j]; }
    double operator()(std::size_t i, std::size_t j) const { return u_[i * space_.nx + j]; }
    std::span<double> slice(std::size_t i) { return {u_.data() + i * space_.nx, space_.nx}; }
    std::span<const double> slice(std::size_t i) const { return {u_.data() + i * space_.nx, space_.nx}; }

    double& lower(std::size_t i, std::size_t j) { return h_[i * space_.nx + j]; }
    double lower(std::size_t i, std::size_t j) const { return h_[i * space_.nx + j]; }
    double& upper(std::size_t i, std::size_t j) { return hp_[i * space_.nx + j]; }
    double upper(std::size_t i, std::size_t j) const { return hp_[i * space_.nx + j]; }

    /// Linear interpolation in x at time node i.
    double value_at(std::size_t i, double x) const;

    const std::vector<double>& values() const { return u_; }

    /// max over interior nodes of |min(u - h, max(R, u - h'))|, R the discrete PDE residual.
    double complementarity_residual = 0.0;
    /// Total relaxation sweeps over all time steps.
    std::size_t sweeps = 0;

private:
    TimeGrid time_;
    SpaceGrid space_;
    std::vector<double> u_, h_, hp_;
};

/// Checks h < h' on the grid and h(T) <= g <= h'(T); throws InvalidArgument otherwise.
void validate_pde(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space);

/// Backward solve without obstacles.
GridValueFunction solve_pde(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space,
                            const PdeOptions& opts = {});
/// Lower obstacle only (the upper one is ignored).
GridValueFunction solve_one_obstacle_vi(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space,
                                        const PdeOptions& opts = {});
GridValueFunction solve_double_obstacle_vi(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space,
                                           const PdeOptions& opts = {});

enum class PenaltySide {
    lower,  ///< source n (h - u)^+; the upper obstacle stays a hard constraint if present
    upper,  ///< source -n (u - h')^+; the lower obstacle stays a hard constraint if present
    both    ///< both obstacles penalized, no hard constraint
};

struct PenalizedPde {
    GridValueFunction u;
    /// n * mean over nodes of the penalized violation, (h - u)^+ or (u - h')^+.
    double penalty_residual = 0.0;
};

/// Penalized problem; the penalty is treated implicitly, so any n dt is stable.
PenalizedPde solve_penalized_pde(const PdeSpec& spec, const TimeGrid& time, const SpaceGrid& space, double n,
                                 PenaltySide side, const PdeOptions& opts = {});

enum class TransformDirection { forward, inverse };

/// forward: w(t, x) -> e^t w(t, x) (obstacles scaled alike); inverse undoes it.
GridValueFunction exp_time_transform(const GridValueFunction& w, TransformDirection direction);

/// Problem solved by e^t w when w solves `spec`: obstacles and terminal data scaled by e^t,
/// discount raised by one and driver e^t f(t, x, e^{-t} w, e^{-t} z).
PdeSpec make_time_transformed(const PdeSpec& spec, double horizon);

/// Columns t, x, u, h, h', active_set with active_set in {lower, interior, upper}.
void write_value_csv(const GridValueFunction& u, std::ostream& out, double active_tol = 1e-10);

struct PdeConvergenceRow {
    std::size_t nx = 0;
    std::size_t steps = 0;
    double u00 = 0.0;
    double delta_vs_previous = 0.0;
};
void write_pde_convergence_csv(std::span<const PdeConvergenceRow> rows, std::ostream& out);

}  // namespace rbsde
