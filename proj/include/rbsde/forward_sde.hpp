#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "rbsde/time_grid.hpp"

namespace rbsde {

/// Coefficient map (t, x, running sup of |x|) -> out. Drift writes d entries, volatility a
/// row-major d x d matrix.
using CoefficientMap =
    std::function<void(double t, std::span<const double> x, double running_sup, std::span<double> out)>;

/// dX = b(t, X) dt + sigma(t, X) dB. An empty drift means b = 0.
struct SdeSpec {
    std::size_t dim = 1;
    std::vector<double> x0{0.0};
    CoefficientMap drift;
    CoefficientMap vol;
    double drift_lipschitz = 0.0;
    double vol_lipschitz = 0.0;

    /// Set by the constant-coefficient factories; enables the vectorised Euler step.
    bool constant_coefficients = false;
    std::vector<double> drift_value;
    std::vector<double> vol_value;

    void validate() const;
    void drift_at(double t, std::span<const double> x, double running_sup, std::span<double> out) const;
    void vol_at(double t, std::span<const double> x, double running_sup, std::span<double> out) const;
};

/// x0 + scale * B in dimension `dim`.
SdeSpec brownian_sde(std::size_t dim, std::vector<double> x0, double scale = 1.0);
/// One-dimensional dX = drift dt + vol dB.
SdeSpec constant_sde(double x0, double drift, double vol);

/// Simulated forward paths with the Brownian increments that produced them. States and
/// increments are stored node-major: one time slice over all paths is contiguous.
class PathEnsemble {
public:
    PathEnsemble(const TimeGrid& grid, std::size_t paths, std::size_t dim, std::uint64_t seed);

    const TimeGrid& grid() const { return grid_; }
    std::size_t paths() const { return paths_; }
    std::size_t dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }

    std::span<const double> state(std::size_t path, std::size_t node) const {
        return {x_.data() + (node * paths_ + path) * dim_, dim_};
    }
    std::span<const double> increment(std::size_t path, std::size_t step) const {
        return {db_.data() + (step * paths_ + path) * dim_, dim_};
    }
    /// All paths at one node, [path][component].
    std::span<const double> state_slice(std::size_t node) const {
        return {x_.data() + node * paths_ * dim_, paths_ * dim_};
    }
    std::span<const double> increment_slice(std::size_t step) const {
        return {db_.data() + step * paths_ * dim_, paths_ * dim_};
    }

    std::span<double> mutable_state(std::size_t path, std::size_t node) {
        return {x_.data() + (node * paths_ + path) * dim_, dim_};
    }
    std::span<double> mutable_increment(std::size_t path, std::size_t step) {
        return {db_.data() + (step * paths_ + path) * dim_, dim_};
    }

    bool operator==(const PathEnsemble&) const = default;

private:
    TimeGrid grid_;
    std::size_t paths_;
    std::size_t dim_;
    std::uint64_t seed_;
    std::vector<double> x_;
    std::vector<double> db_;
};

/// Euler-Maruyama paths. Path m draws from its own substream, so the ensemble is
/// bit-identical for a given seed regardless of `workers`.
PathEnsemble simulate_paths(const SdeSpec& sde, const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                            std::size_t workers = 1);

/// Rebuilds the states from the increments stored in `source`.
PathEnsemble replay_paths(const SdeSpec& sde, const PathEnsemble& source);

/// Monte Carlo estimate of E[sup_t |X_t|^n].
double path_sup_moment(const PathEnsemble& ens, double n);

/// Path-major CSV with a header carrying seed and grid; read_ensemble_csv inverts it exactly.
void write_ensemble_csv(const PathEnsemble& ens, std::ostream& out);
PathEnsemble read_ensemble_csv(std::istream& in);

}  // namespace rbsde
