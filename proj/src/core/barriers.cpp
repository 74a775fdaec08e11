#include "rbsde/barriers.hpp"

#include <algorithm>
#include <cmath>

#include "rbsde/error.hpp"

namespace rbsde {

void BarrierPair::require_ordered(double t, std::span<const double> x) const {
    const double lo = lower_at(t, x);
    const double hi = upper_at(t, x);
    require(!std::isnan(lo) && !std::isnan(hi), "barriers: NaN obstacle at t=", t);
    require(lo < hi, "barriers: lower ", lo, " must be strictly below upper ",
            hi, " at t=", t);
}

BarrierPair constant_barriers(double lower, double upper) {
    require(lower < upper, "constant_barriers: lower ", lower, " must be strictly below upper ", upper);
    return {[lower](double, std::span<const double>) { return lower; },
            [upper](double, std::span<const double>) { return upper; }};
}

BarrierPair no_barriers() { return {}; }

TerminalCondition constant_terminal(double c) {
    return {"constant", [c](std::span<const double>) { return c; }};
}

TerminalCondition clamp_terminal(double lo, double hi, double scale) {
    require(lo <= hi, "clamp_terminal: lo must not exceed hi");
    return {"clamp_terminal", [lo, hi, scale](std::span<const double> x) { return std::clamp(scale * x[0], lo, hi); }};
}

}  // namespace rbsde
