#include "rbsde/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "rbsde/error.hpp"
#include "rbsde/simd/kernels.hpp"

namespace rbsde {

namespace {

constexpr double kRidgeThreshold = 1e-12;
constexpr double kRidgeWeight = 1e-10;

void graded_exponents(std::size_t dims, std::size_t degree, std::vector<std::vector<std::size_t>>& out) {
    std::vector<std::size_t> e(dims, 0);
    for (std::size_t total = 0; total <= degree; ++total) {
        // all compositions of `total` into `dims` parts, first coordinate varying slowest
        auto rec = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
            if (pos + 1 == dims) {
                e[pos] = left;
                out.push_back(e);
                return;
            }
            for (std::size_t k = left + 1; k-- > 0;) {
                e[pos] = k;
                self(self, pos + 1, left - k);
            }
        };
        if (dims == 0) {
            out.push_back({});
            break;
        }
        rec(rec, 0, total);
    }
}

std::size_t binomial(std::size_t n, std::size_t k) {
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

RegressionBasis RegressionBasis::polynomial(std::size_t degree) {
    RegressionBasis b;
    b.family = BasisFamily::polynomial;
    b.degree = degree;
    return b;
}

RegressionBasis RegressionBasis::piecewise_constant(std::size_t bins) {
    RegressionBasis b;
    b.family = BasisFamily::bins;
    b.bins = bins;
    return b;
}

std::size_t RegressionBasis::size(std::size_t dim) const {
    if (family == BasisFamily::polynomial) return binomial(dim + degree, degree);
    std::size_t p = 1;
    for (std::size_t k = 0; k < dim; ++k) p *= bins;
    return p;
}

void RegressionBasis::validate() const {
    require(family != BasisFamily::bins || bins >= 1, "RegressionBasis: bin count must be positive");
    require(clip_lo.size() == clip_hi.size(), "RegressionBasis: clip bounds have different lengths");
    for (std::size_t k = 0; k < clip_lo.size(); ++k)
        require(clip_lo[k] < clip_hi[k], "RegressionBasis: clip bound ", k, " is empty");
}

Regressor::Regressor(const RegressionBasis& basis, std::span<const double> states, std::size_t dim)
    : n_(dim ? states.size() / dim : 0), dim_(dim), basis_(basis) {
    basis.validate();
    require(dim >= 1 && states.size() == n_ * dim, "Regressor: states do not match dimension ", dim);
    require(n_ >= 1, "Regressor: no samples");
    require(basis.clip_lo.empty() || basis.clip_lo.size() == dim, "Regressor: clip bounds need ", dim, " entries");

    for (std::size_t c = 0; c < dim; ++c) {
        double mn = states[c], mx = states[c];
        for (std::size_t m = 0; m < n_; ++m) {
            mn = std::min(mn, states[m * dim + c]);
            mx = std::max(mx, states[m * dim + c]);
        }
        const double scale = std::max({1.0, std::abs(mn), std::abs(mx)});
        if (mx - mn <= 1e-12 * scale) continue;
        active_.push_back(c);
        lo_.push_back(basis.clip_lo.empty() ? mn : basis.clip_lo[c]);
        hi_.push_back(basis.clip_hi.empty() ? mx : basis.clip_hi[c]);
    }

    const std::size_t da = active_.size();
    if (basis.family == BasisFamily::polynomial) {
        graded_exponents(da, da ? basis.degree : 0, exponents_);
        p_ = exponents_.size();
    } else {
        p_ = da ? basis.size(da) : 1;
    }
    require(p_ <= n_ || da == 0, "Regressor: ", n_, " samples for ", p_, " basis functions");

    const auto& k = simd::kernels();
    design_.assign(n_ * p_, 0.0);
    std::vector<double> scaled(n_ * da), column(n_);
    for (std::size_t a = 0; a < da; ++a) {
        for (std::size_t m = 0; m < n_; ++m) column[m] = states[m * dim + active_[a]];
        const double center = 0.5 * (lo_[a] + hi_[a]);
        k.clip_scale(column.data(), n_, lo_[a], hi_[a], center, 2.0 / (hi_[a] - lo_[a]), scaled.data() + a * n_);
    }

    if (basis.family == BasisFamily::polynomial) {
        const std::size_t deg = da ? basis.degree : 0;
        std::vector<double> powers(da * (deg + 1) * n_);
        for (std::size_t a = 0; a < da; ++a)
            k.monomials(scaled.data() + a * n_, n_, deg, powers.data() + a * (deg + 1) * n_);
        for (std::size_t j = 0; j < p_; ++j) {
            double* col = design_.data() + j * n_;
            std::fill(col, col + n_, 1.0);
            for (std::size_t a = 0; a < da; ++a) {
                const std::size_t e = exponents_[j][a];
                if (e == 0) continue;
                const double* pw = powers.data() + (a * (deg + 1) + e) * n_;
                for (std::size_t m = 0; m < n_; ++m) col[m] *= pw[m];
            }
        }
    } else {
        for (std::size_t m = 0; m < n_; ++m) {
            std::size_t idx = 0;
            for (std::size_t a = 0; a < da; ++a) {
                const double u = 0.5 * (scaled[a * n_ + m] + 1.0);
                const auto b = std::min(basis.bins - 1, static_cast<std::size_t>(u * static_cast<double>(basis.bins)));
                idx = idx * basis.bins + b;
            }
            design_[idx * n_ + m] = 1.0;
        }
    }

    Eigen::MatrixXd gram(p_, p_);
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < p_; ++i)
        for (std::size_t j = 0; j <= i; ++j)
            gram(i, j) = gram(j, i) = k.dot(design_.data() + i * n_, design_.data() + j * n_, n_) * inv_n;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double emax = eig.eigenvalues().maxCoeff();
    const double emin = eig.eigenvalues().minCoeff();
    require<NumericalError>(std::isfinite(emax) && emax > 0.0, "Regressor: design matrix is not finite");
    ratio_ = emin / emax;
    if (ratio_ < kRidgeThreshold) {
        ridge_ = true;
        gram.diagonal().array() += kRidgeWeight * emax;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    require<NumericalError>(llt.info() == Eigen::Success, "Regressor: Gram factorisation failed");
    Eigen::MatrixXd l = llt.matrixL();
    chol_.assign(l.data(), l.data() + p_ * p_);
}

std::vector<double> Regressor::coefficients(std::span<const double> values) const {
    require(values.size() == n_, "Regressor: expected ", n_, " values, got ", values.size());
    const auto& k = simd::kernels();
    const double inv_n = 1.0 / static_cast<double>(n_);
    std::vector<double> c(p_);
    for (std::size_t j = 0; j < p_; ++j) c[j] = k.dot(design_.data() + j * n_, values.data(), n_) * inv_n;
    // L L^T c = b, L stored column-major
    for (std::size_t i = 0; i < p_; ++i) {
        double s = c[i];
        for (std::size_t j = 0; j < i; ++j) s -= chol_[j * p_ + i] * c[j];
        c[i] = s / chol_[i * p_ + i];
    }
    for (std::size_t i = p_; i-- > 0;) {
        double s = c[i];
        for (std::size_t j = i + 1; j < p_; ++j) s -= chol_[i * p_ + j] * c[j];
        c[i] = s / chol_[i * p_ + i];
    }
    return c;
}

void Regressor::fit(std::span<const double> values, std::span<double> fitted) const {
    require(fitted.size() == n_, "Regressor: fitted output has the wrong length");
    const auto c = coefficients(values);
    const auto& k = simd::kernels();
    std::fill(fitted.begin(), fitted.end(), 0.0);
    for (std::size_t j = 0; j < p_; ++j) k.axpy(c[j], design_.data() + j * n_, fitted.data(), n_);
}

void Regressor::basis_row(std::span<const double> state, std::vector<double>& row) const {
    require(state.size() == dim_, "Regressor: state has ", state.size(), " components, expected ", dim_);
    const std::size_t da = active_.size();
    std::vector<double> s(da);
    for (std::size_t a = 0; a < da; ++a) {
        const double x = std::clamp(state[active_[a]], lo_[a], hi_[a]);
        s[a] = (x - 0.5 * (lo_[a] + hi_[a])) * (2.0 / (hi_[a] - lo_[a]));
    }
    row.assign(p_, 0.0);
    if (basis_.family == BasisFamily::polynomial) {
        for (std::size_t j = 0; j < p_; ++j) {
            double v = 1.0;
            for (std::size_t a = 0; a < da; ++a)
                for (std::size_t e = 0; e < exponents_[j][a]; ++e) v *= s[a];
            row[j] = v;
        }
    } else {
        std::size_t idx = 0;
        for (std::size_t a = 0; a < da; ++a) {
            const double u = 0.5 * (s[a] + 1.0);
            idx = idx * basis_.bins +
                  std::min(basis_.bins - 1, static_cast<std::size_t>(u * static_cast<double>(basis_.bins)));
        }
        row[idx] = 1.0;
    }
}

double Regressor::evaluate(std::span<const double> coef, std::span<const double> state) const {
    require(coef.size() == p_, "Regressor: expected ", p_, " coefficients");
    std::vector<double> row;
    basis_row(state, row);
    double v = 0.0;
    for (std::size_t j = 0; j < p_; ++j) v += coef[j] * row[j];
    return v;
}

FittedExpectation regress_conditional_expectation(std::span<const double> values, std::span<const double> states,
                                                  std::size_t dim, const RegressionBasis& basis) {
    Regressor reg(basis, states, dim);
    auto coef = reg.coefficients(values);
    return FittedExpectation(std::move(reg), std::move(coef));
}

}  // namespace rbsde
