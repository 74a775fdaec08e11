#include "rbsde/generator.hpp"

#include <cmath>
#include <numeric>

#include "rbsde/error.hpp"

namespace rbsde {

double safe_ylogy(double y) {
    if (y == 0.0) return 0.0;
    return y * std::log(std::abs(y));
}

double safe_zsqrtlog(double r) {
    if (r <= 0.0) return 0.0;
    return r * std::sqrt(std::abs(std::log(r)));
}

namespace {

double norm(std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

bool all_finite(std::span<const double> v) {
    for (double a : v)
        if (!std::isfinite(a)) return false;
    return true;
}

std::string describe(std::span<const double> v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += detail::concat(v[i]);
    }
    return s + ")";
}

}  // namespace

double GeneratorSpec::eta_at(double t, std::span<const double> x) const {
    return eta ? std::abs(eta(t, x)) : eta_bound;
}

double GeneratorSpec::envelope(double t, std::span<const double> x, double y, std::span<const double> z) const {
    return eta_at(t, x) + c0 * std::abs(safe_ylogy(std::abs(y))) + c1 * safe_zsqrtlog(norm(z));
}

double eval_generator(const GeneratorSpec& spec, double t, std::span<const double> x, double y,
                      std::span<const double> z) {
    if (!(std::isfinite(t) && std::isfinite(y) && all_finite(x) && all_finite(z)))
        throw InvalidArgument(detail::concat("eval_generator[", spec.name, "]: non-finite input t=", t,
                                             " x=", describe(x), " y=", y, " z=", describe(z)));
    const double value = spec.driver(t, x, y, z);
    if (!std::isfinite(value))
        throw NumericalError(detail::concat("eval_generator[", spec.name, "]: non-finite value ", value, " at t=", t,
                                            " x=", describe(x), " y=", y, " z=", describe(z)));
    return value;
}

LogGrowthReport check_log_growth(const GeneratorSpec& spec, std::span<const GeneratorSample> samples) {
    require(!samples.empty(), "check_log_growth: empty sample set");
    LogGrowthReport report;
    report.samples = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const double value = std::abs(spec.driver(s.t, s.x, s.y, s.z));
        const double bound = spec.envelope(s.t, s.x, s.y, s.z);
        // Relative slack absorbs rounding when the envelope is attained with equality.
        if (!std::isfinite(value) || value > bound * (1.0 + 1e-12) + 1e-300) report.violations.push_back({i, value, bound});
    }
    return report;
}

std::vector<GeneratorSample> probe_samples(std::span<const double> times,
                                           const std::vector<std::vector<double>>& states, std::size_t z_dim) {
    static constexpr double ys[] = {-20.0, -3.0, -1.0, -0.4, 0.0, 0.3, 1.0, 2.718281828459045, 15.0};
    static constexpr double zs[] = {0.0, 0.2, 1.0, 3.0, 25.0};
    std::vector<GeneratorSample> out;
    for (double t : times)
        for (const auto& x : states)
            for (double y : ys)
                for (double zn : zs)
                    for (double sign : {-1.0, 1.0}) {
                        std::vector<double> z(z_dim, 0.0);
                        if (z_dim > 0) z[0] = sign * zn;
                        out.push_back({t, x, y, std::move(z)});
                    }
    return out;
}

namespace {

GeneratorSpec named(std::string name, Driver driver) {
    GeneratorSpec g;
    g.name = std::move(name);
    g.driver = std::move(driver);
    return g;
}

}  // namespace

GeneratorSpec zero_generator() {
    return named("zero", [](double, std::span<const double>, double, std::span<const double>) { return 0.0; });
}

GeneratorSpec constant_generator(double c) {
    GeneratorSpec g = named("constant", [c](double, std::span<const double>, double, std::span<const double>) { return c; });
    g.eta_bound = std::abs(c);
    return g;
}

GeneratorSpec neg_y_log_y(double k) {
    GeneratorSpec g = named("neg_y_log_y",
                    [k](double, std::span<const double>, double y, std::span<const double>) { return -k * safe_ylogy(y); });
    g.c0 = std::abs(k);
    return g;
}

GeneratorSpec z_sqrt_log(double c) {
    GeneratorSpec g = named("z_sqrt_log", [c](double, std::span<const double>, double, std::span<const double> z) {
                        return c * safe_zsqrtlog(norm(z));
                    });
    g.c1 = std::abs(c);
    return g;
}

GeneratorSpec linear_generator(double a, double b) {
    GeneratorSpec g = named("linear",
                    [a, b](double, std::span<const double>, double y, std::span<const double>) { return a + b * y; });
    // |b y| <= |b| e on |y| < e and <= |b| |y| |ln|y|| beyond.
    g.eta_bound = std::abs(a) + std::abs(b) * std::exp(1.0);
    g.c0 = std::abs(b);
    return g;
}

GeneratorSpec shifted(const GeneratorSpec& base, double c) {
    GeneratorSpec g = base;
    g.name = base.name + "+const";
    g.driver = [f = base.driver, c](double t, std::span<const double> x, double y, std::span<const double> z) {
        return f(t, x, y, z) + c;
    };
    if (base.eta) {
        g.eta = [e = base.eta, c](double t, std::span<const double> x) { return std::abs(e(t, x)) + std::abs(c); };
    }
    g.eta_bound = base.eta_bound + std::abs(c);
    return g;
}

}  // namespace rbsde
