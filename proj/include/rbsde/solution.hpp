#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rbsde/time_grid.hpp"

namespace rbsde {

/// Scalar process per path on the grid nodes. Storage is node-major so that one time
/// slice across all paths is contiguous.
class PathField {
public:
    PathField() = default;
    PathField(std::size_t paths, std::size_t nodes, double init = 0.0)
        : paths_(paths), nodes_(nodes), data_(paths * nodes, init) {}

    std::size_t paths() const { return paths_; }
    std::size_t nodes() const { return nodes_; }

    double& operator()(std::size_t path, std::size_t node) { return data_[node * paths_ + path]; }
    double operator()(std::size_t path, std::size_t node) const { return data_[node * paths_ + path]; }

    std::span<double> slice(std::size_t node) { return {data_.data() + node * paths_, paths_}; }
    std::span<const double> slice(std::size_t node) const { return {data_.data() + node * paths_, paths_}; }

    const std::vector<double>& data() const { return data_; }

private:
    std::size_t paths_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> data_;
};

/// Vector-valued process per path; within a node the layout is [path][component].
class PathVectorField {
public:
    PathVectorField() = default;
    PathVectorField(std::size_t paths, std::size_t nodes, std::size_t dim, double init = 0.0)
        : paths_(paths), nodes_(nodes), dim_(dim), data_(paths * nodes * dim, init) {}

    std::size_t paths() const { return paths_; }
    std::size_t nodes() const { return nodes_; }
    std::size_t dim() const { return dim_; }

    double& operator()(std::size_t path, std::size_t node, std::size_t k) {
        return data_[(node * paths_ + path) * dim_ + k];
    }
    double operator()(std::size_t path, std::size_t node, std::size_t k) const {
        return data_[(node * paths_ + path) * dim_ + k];
    }
    std::span<double> at(std::size_t path, std::size_t node) {
        return {data_.data() + (node * paths_ + path) * dim_, dim_};
    }
    std::span<const double> at(std::size_t path, std::size_t node) const {
        return {data_.data() + (node * paths_ + path) * dim_, dim_};
    }
    std::span<double> slice(std::size_t node) { return {data_.data() + node * paths_ * dim_, paths_ * dim_}; }
    std::span<const double> slice(std::size_t node) const {
        return {data_.data() + node * paths_ * dim_, paths_ * dim_};
    }

private:
    std::size_t paths_ = 0;
    std::size_t nodes_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

/// Discrete (Y, Z, K+, K-) on every path. Y, K+ and K- live on the N+1 nodes, Z on the N
/// steps. K+_{i+1} - K+_i is the upward push applied at node i (likewise K-), so both start
/// at zero and are nondecreasing.
struct SolutionQuadruple {
    TimeGrid grid;
    PathField Y;
    PathVectorField Z;
    PathField Kplus;
    PathField Kminus;

    /// Standard error of Y_0 from the first backward regression.
    double y0_se = 0.0;
    /// Number of regressions that fell back to a ridge solve.
    std::size_t ridge_fallbacks = 0;

    SolutionQuadruple(const TimeGrid& g, std::size_t paths, std::size_t dim)
        : grid(g),
          Y(paths, g.nodes()),
          Z(paths, g.steps(), dim),
          Kplus(paths, g.nodes()),
          Kminus(paths, g.nodes()) {}

    std::size_t paths() const { return Y.paths(); }
    double y0() const { return Y(0, 0); }
};

}  // namespace rbsde
