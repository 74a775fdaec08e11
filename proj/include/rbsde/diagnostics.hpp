#pragma once

#include <span>

namespace rbsde {

/// Exponents used by the integrability diagnostics. `lambda` is the moment exponent
/// parameter ("large enough"), `p` the integrability exponent in (1, 2).
struct DiagnosticsConfig {
    double lambda = 1.0;
    double p = 1.5;

    void validate() const;
    /// e^{lambda T} + 1.
    double moment_exponent(double horizon) const;
};

struct MomentDiagnostic {
    double exponent = 0.0;
    double estimate = 0.0;
    bool finite = false;
};

/// Sample estimate of E[|xi|^{e^{lambda T}+1}].
MomentDiagnostic terminal_moment(std::span<const double> xi, const DiagnosticsConfig& cfg, double horizon);

/// Sample estimate of E[(sup_t (L_t^+)^{e^{lambda T}+1})^{p/(p-1)}] given per-path suprema of L^+
/// (or of U^- for the upper barrier).
MomentDiagnostic barrier_moment(std::span<const double> sup_positive_part, const DiagnosticsConfig& cfg,
                                double horizon);

}  // namespace rbsde
