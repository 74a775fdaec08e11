#include <immintrin.h>

#include <algorithm>

#include "rbsde/simd/kernels.hpp"

// Compiled with -mavx2 -mfma. Only reductions use FMA; elementwise kernels keep separate
// multiply and add so they agree with the scalar reference exactly.

namespace rbsde::simd {
namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void sum_sumsq(const double* v, std::size_t n, double* sum, double* sumsq) {
    __m256d s = _mm256_setzero_pd();
    __m256d q = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(v + i);
        s = _mm256_add_pd(s, x);
        q = _mm256_fmadd_pd(x, x, q);
    }
    double ss = hsum(s), qq = hsum(q);
    for (; i < n; ++i) {
        ss += v[i];
        qq += v[i] * v[i];
    }
    *sum = ss;
    *sumsq = qq;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(a, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void euler_step(const double* x, const double* dB, double drift_dt, double vol, double* out, std::size_t n) {
    const __m256d b = _mm256_set1_pd(drift_dt);
    const __m256d s = _mm256_set1_pd(vol);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d shifted = _mm256_add_pd(_mm256_loadu_pd(x + i), b);
        const __m256d noise = _mm256_mul_pd(s, _mm256_loadu_pd(dB + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(shifted, noise));
    }
    for (; i < n; ++i) out[i] = (x[i] + drift_dt) + vol * dB[i];
}

void clip_scale(const double* x, std::size_t n, double lo, double hi, double center, double inv_half,
                double* out) {
    const __m256d vlo = _mm256_set1_pd(lo), vhi = _mm256_set1_pd(hi);
    const __m256d c = _mm256_set1_pd(center), k = _mm256_set1_pd(inv_half);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(x + i), vlo), vhi);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_sub_pd(v, c), k));
    }
    for (; i < n; ++i) out[i] = (std::min(std::max(x[i], lo), hi) - center) * inv_half;
}

void monomials(const double* s, std::size_t n, std::size_t degree, double* cols) {
    std::fill(cols, cols + n, 1.0);
    for (std::size_t j = 1; j <= degree; ++j) {
        const double* prev = cols + (j - 1) * n;
        double* cur = cols + j * n;
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4)
            _mm256_storeu_pd(cur + i, _mm256_mul_pd(_mm256_loadu_pd(prev + i), _mm256_loadu_pd(s + i)));
        for (; i < n; ++i) cur[i] = prev[i] * s[i];
    }
}

void project_band(const double* yhat, const double* lo, const double* hi, double* y, double* up, double* down,
                  std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(yhat + i);
        const __m256d l = _mm256_loadu_pd(lo + i);
        const __m256d h = _mm256_loadu_pd(hi + i);
        _mm256_storeu_pd(y + i, _mm256_min_pd(_mm256_max_pd(v, l), h));
        _mm256_storeu_pd(up + i, _mm256_max_pd(_mm256_sub_pd(l, v), zero));
        _mm256_storeu_pd(down + i, _mm256_max_pd(_mm256_sub_pd(v, h), zero));
    }
    for (; i < n; ++i) {
        const double v = yhat[i];
        y[i] = std::min(std::max(v, lo[i]), hi[i]);
        up[i] = std::max(lo[i] - v, 0.0);
        down[i] = std::max(v - hi[i], 0.0);
    }
}

void penalize_below(double* y, const double* lo, double keep, double* push, std::size_t n) {
    const __m256d k = _mm256_set1_pd(keep);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(y + i);
        const __m256d l = _mm256_loadu_pd(lo + i);
        const __m256d below = _mm256_cmp_pd(v, l, _CMP_LT_OQ);
        const __m256d moved = _mm256_sub_pd(l, _mm256_mul_pd(_mm256_sub_pd(l, v), k));
        _mm256_storeu_pd(y + i, _mm256_blendv_pd(v, moved, below));
        _mm256_storeu_pd(push + i, _mm256_blendv_pd(zero, _mm256_sub_pd(moved, v), below));
    }
    for (; i < n; ++i) {
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
    const __m256d k = _mm256_set1_pd(keep);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(y + i);
        const __m256d h = _mm256_loadu_pd(hi + i);
        const __m256d above = _mm256_cmp_pd(v, h, _CMP_GT_OQ);
        const __m256d moved = _mm256_add_pd(h, _mm256_mul_pd(_mm256_sub_pd(v, h), k));
        _mm256_storeu_pd(y + i, _mm256_blendv_pd(v, moved, above));
        _mm256_storeu_pd(push + i, _mm256_blendv_pd(zero, _mm256_sub_pd(v, moved), above));
    }
    for (; i < n; ++i) {
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

constexpr Kernels kAvx2{Isa::avx2, "avx2", dot,          sum_sumsq,      axpy,           euler_step,
                        clip_scale, monomials, project_band, penalize_below, penalize_above};

}  // namespace

const Kernels* avx2_kernels_impl() { return &kAvx2; }

}  // namespace rbsde::simd
