#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>

#include "rbsde/generator.hpp"

namespace rbsde {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Lower and upper obstacle maps (t, x) -> real. Either side may be infinite.
struct BarrierPair {
    StateFunction lower;
    StateFunction upper;

    double lower_at(double t, std::span<const double> x) const { return lower ? lower(t, x) : -kInf; }
    double upper_at(double t, std::span<const double> x) const { return upper ? upper(t, x) : kInf; }

    /// Throws InvalidArgument unless L(t,x) < U(t,x) (checked where both are finite).
    void require_ordered(double t, std::span<const double> x) const;
};

BarrierPair constant_barriers(double lower, double upper);
BarrierPair no_barriers();

/// Terminal value as a function of the terminal state.
struct TerminalCondition {
    std::string name;
    std::function<double(std::span<const double> x_terminal)> xi;

    double operator()(std::span<const double> x) const { return xi(x); }
};

TerminalCondition constant_terminal(double c);
/// xi = clamp(scale * x_0, lo, hi) on the first state coordinate.
TerminalCondition clamp_terminal(double lo, double hi, double scale = 1.0);

}  // namespace rbsde
