#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rbsde {

/// y ln|y|, extended by continuity with value 0 at y = 0.
double safe_ylogy(double y);

/// r sqrt(|ln r|) for r >= 0, extended by continuity with value 0 at r = 0.
double safe_zsqrtlog(double r);

using Driver = std::function<double(double t, std::span<const double> x, double y,
                                    std::span<const double> z)>;
using StateFunction = std::function<double(double t, std::span<const double> x)>;

/// A driver f(t, x, y, z) together with its declared logarithmic-growth envelope
///
///   |f(t,x,y,z)| <= |eta_t| + c0 |y| |ln|y|| + c1 |z| sqrt(|ln|z||).
///
/// `eta`, when set, gives a state-dependent bound on |eta_t|; otherwise the constant
/// `eta_bound` is used.
struct GeneratorSpec {
    std::string name;
    Driver driver;
    double eta_bound = 0.0;
    double c0 = 0.0;
    double c1 = 0.0;
    StateFunction eta;

    double eta_at(double t, std::span<const double> x) const;
    double envelope(double t, std::span<const double> x, double y, std::span<const double> z) const;
};

/// Evaluates the driver; throws InvalidArgument on non-finite input and NumericalError
/// (naming the offending point) on non-finite output.
double eval_generator(const GeneratorSpec& spec, double t, std::span<const double> x, double y,
                      std::span<const double> z);

struct GeneratorSample {
    double t = 0.0;
    std::vector<double> x;
    double y = 0.0;
    std::vector<double> z;
};

struct LogGrowthViolation {
    std::size_t index;
    double value;  // |f| at the sample
    double bound;  // envelope at the sample
};

struct LogGrowthReport {
    std::size_t samples = 0;
    std::vector<LogGrowthViolation> violations;
    bool passed() const { return violations.empty(); }
};

/// Lists every sample at which |f| exceeds the declared envelope.
LogGrowthReport check_log_growth(const GeneratorSpec& spec, std::span<const GeneratorSample> samples);

/// Probe grid over y and z at the given states, used as the solver-side precondition check.
std::vector<GeneratorSample> probe_samples(std::span<const double> times,
                                           const std::vector<std::vector<double>>& states,
                                           std::size_t z_dim);

// Built-in drivers with their tight envelope constants.
GeneratorSpec zero_generator();
GeneratorSpec constant_generator(double c);
/// f(y) = -K y ln|y|.
GeneratorSpec neg_y_log_y(double k);
/// f(z) = c |z| sqrt(|ln|z||).
GeneratorSpec z_sqrt_log(double c);
/// f(y) = a + b y.
GeneratorSpec linear_generator(double a, double b);
/// f + c, with the envelope widened by |c|.
GeneratorSpec shifted(const GeneratorSpec& base, double c);

}  // namespace rbsde
