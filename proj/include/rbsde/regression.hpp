#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rbsde {

enum class BasisFamily { polynomial, bins };

/// Basis functions of the state used to approximate conditional expectations. States are
/// clipped to [clip_lo, clip_hi] per coordinate and mapped affinely onto [-1, 1] before the
/// basis is applied. Empty clip bounds are taken from the sample range at fit time.
struct RegressionBasis {
    BasisFamily family = BasisFamily::polynomial;
    /// Total degree of the polynomial family.
    std::size_t degree = 3;
    /// Bins per coordinate of the piecewise-constant family.
    std::size_t bins = 16;
    std::vector<double> clip_lo;
    std::vector<double> clip_hi;

    static RegressionBasis polynomial(std::size_t degree);
    static RegressionBasis piecewise_constant(std::size_t bins);

    /// Number of basis functions in dimension `dim`.
    std::size_t size(std::size_t dim) const;
    void validate() const;
};

/// Least-squares projection onto a basis, set up once per sample of states and reused for
/// several right-hand sides. States are laid out [sample][component].
class Regressor {
public:
    Regressor(const RegressionBasis& basis, std::span<const double> states, std::size_t dim);

    std::size_t samples() const { return n_; }
    /// Columns actually used (1 when the states carry no spread).
    std::size_t columns() const { return p_; }
    bool ridge_used() const { return ridge_; }
    /// Smallest over largest eigenvalue of the normalised Gram matrix.
    double condition_ratio() const { return ratio_; }

    /// Coefficients of the projection of `values`.
    std::vector<double> coefficients(std::span<const double> values) const;
    /// Fitted values at the sample states.
    void fit(std::span<const double> values, std::span<double> fitted) const;
    /// Evaluates a coefficient vector at an arbitrary state.
    double evaluate(std::span<const double> coef, std::span<const double> state) const;

private:
    void basis_row(std::span<const double> state, std::vector<double>& row) const;

    std::size_t n_;
    std::size_t dim_;
    RegressionBasis basis_;
    std::vector<std::size_t> active_;  // coordinates with spread
    std::vector<double> lo_, hi_;      // clip bounds of the active coordinates
    std::vector<std::vector<std::size_t>> exponents_;
    std::size_t p_ = 1;
    std::vector<double> design_;  // column-major, n x p
    std::vector<double> chol_;    // lower Cholesky factor of the (possibly ridged) Gram, p x p
    bool ridge_ = false;
    double ratio_ = 1.0;
};

/// Fitted conditional-expectation map x -> E[value | state = x].
class FittedExpectation {
public:
    FittedExpectation(Regressor reg, std::vector<double> coef) : reg_(std::move(reg)), coef_(std::move(coef)) {}
    double operator()(std::span<const double> state) const { return reg_.evaluate(coef_, state); }
    const std::vector<double>& coefficients() const { return coef_; }
    bool ridge_used() const { return reg_.ridge_used(); }

private:
    Regressor reg_;
    std::vector<double> coef_;
};

/// One-shot regression of per-sample `values` on `states` ([sample][component]).
FittedExpectation regress_conditional_expectation(std::span<const double> values, std::span<const double> states,
                                                  std::size_t dim, const RegressionBasis& basis);

}  // namespace rbsde
