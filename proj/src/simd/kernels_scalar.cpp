#include <algorithm>

#include "rbsde/simd/kernels.hpp"

namespace rbsde::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void sum_sumsq(const double* v, std::size_t n, double* sum, double* sumsq) {
    double s = 0.0, q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += v[i];
        q += v[i] * v[i];
    }
    *sum = s;
    *sumsq = q;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void euler_step(const double* x, const double* dB, double drift_dt, double vol, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] + drift_dt) + vol * dB[i];
}

void clip_scale(const double* x, std::size_t n, double lo, double hi, double center, double inv_half,
                double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = (std::min(std::max(x[i], lo), hi) - center) * inv_half;
}

void monomials(const double* s, std::size_t n, std::size_t degree, double* cols) {
    std::fill(cols, cols + n, 1.0);
    for (std::size_t j = 1; j <= degree; ++j) {
        const double* prev = cols + (j - 1) * n;
        double* cur = cols + j * n;
        for (std::size_t i = 0; i < n; ++i) cur[i] = prev[i] * s[i];
    }
}

void project_band(const double* yhat, const double* lo, const double* hi, double* y, double* up, double* down,
                  std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = yhat[i];
        y[i] = std::min(std::max(v, lo[i]), hi[i]);
        up[i] = std::max(lo[i] - v, 0.0);
        down[i] = std::max(v - hi[i], 0.0);
    }
}

void penalize_below(double* y, const double* lo, double keep, double* push, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] < lo[i]) {
            const double gap = lo[i] - y[i];
            const double moved = lo[i] - gap * keep;
            push[i] = moved - y[i];
            y[i] = moved;
        } else {
            push[i] = 0.0;
        }
    }
}

void penalize_above(double* y, const double* hi, double keep, double* push, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] > hi[i]) {
            const double gap = y[i] - hi[i];
            const double moved = hi[i] + gap * keep;
            push[i] = y[i] - moved;
            y[i] = moved;
        } else {
            push[i] = 0.0;
        }
    }
}

constexpr Kernels kScalar{Isa::scalar, "scalar", dot,          sum_sumsq,      axpy,           euler_step,
                          clip_scale,  monomials, project_band, penalize_below, penalize_above};

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

}  // namespace rbsde::simd
