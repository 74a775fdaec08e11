#pragma once

#include <cstddef>

#include "rbsde/error.hpp"

namespace rbsde {

/// Uniform partition t_i = i T / N of [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
        require(horizon > 0.0, "TimeGrid: horizon must be positive, got ", horizon);
        require(steps >= 1, "TimeGrid: steps must be a positive integer");
    }

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    std::size_t nodes() const { return steps_ + 1; }
    double dt() const { return horizon_ / static_cast<double>(steps_); }

    /// Node i; the last node is exactly T.
    double time(std::size_t i) const {
        return i == steps_ ? horizon_ : horizon_ * static_cast<double>(i) / static_cast<double>(steps_);
    }

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_;
    std::size_t steps_;
};

}  // namespace rbsde
