#include "rbsde/diagnostics.hpp"

#include <cmath>

#include "rbsde/error.hpp"

namespace rbsde {

void DiagnosticsConfig::validate() const {
    require(lambda > 0.0, "DiagnosticsConfig: lambda must be positive, got ", lambda);
    require(p > 1.0 && p < 2.0, "DiagnosticsConfig: p must lie in (1, 2), got ", p);
}

double DiagnosticsConfig::moment_exponent(double horizon) const { return std::exp(lambda * horizon) + 1.0; }

namespace {

MomentDiagnostic empirical_moment(std::span<const double> v, double exponent) {
    MomentDiagnostic d;
    d.exponent = exponent;
    if (v.empty()) {
        d.finite = true;
        return d;
    }
    double sum = 0.0;
    for (double a : v) sum += std::pow(std::abs(a), exponent);
    d.estimate = sum / static_cast<double>(v.size());
    d.finite = std::isfinite(d.estimate);
    return d;
}

}  // namespace

MomentDiagnostic terminal_moment(std::span<const double> xi, const DiagnosticsConfig& cfg, double horizon) {
    cfg.validate();
    return empirical_moment(xi, cfg.moment_exponent(horizon));
}

MomentDiagnostic barrier_moment(std::span<const double> sup_positive_part, const DiagnosticsConfig& cfg,
                                double horizon) {
    cfg.validate();
    return empirical_moment(sup_positive_part, cfg.moment_exponent(horizon) * cfg.p / (cfg.p - 1.0));
}

}  // namespace rbsde
