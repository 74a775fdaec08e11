#pragma once

#include <cstddef>

// Data-parallel inner loops shared by the path-wise solvers. Every kernel has a scalar
// reference in kernels_scalar.cpp; vector variants must reproduce the elementwise kernels
// bit for bit and the reductions up to summation order.

namespace rbsde::simd {

enum class Isa { scalar, avx2 };

struct Kernels {
    Isa isa;
    const char* name;

    /// sum a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// sum v[i] and sum v[i]^2
    void (*sum_sumsq)(const double* v, std::size_t n, double* sum, double* sumsq);
    /// y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// out[i] = (x[i] + drift_dt) + vol * dB[i]
    void (*euler_step)(const double* x, const double* dB, double drift_dt, double vol, double* out,
                       std::size_t n);
    /// out[i] = (clamp(x[i], lo, hi) - center) * inv_half
    void (*clip_scale)(const double* x, std::size_t n, double lo, double hi, double center,
                       double inv_half, double* out);
    /// cols[j * n + i] = s[i]^j for j = 0..degree
    void (*monomials)(const double* s, std::size_t n, std::size_t degree, double* cols);
    /// y = clamp(yhat, lo, hi); up = (lo - yhat)^+; down = (yhat - hi)^+
    void (*project_band)(const double* yhat, const double* lo, const double* hi, double* y, double* up,
                         double* down, std::size_t n);
    /// Where y < lo: y <- lo - (lo - y) * keep. push receives the increase (0 elsewhere).
    void (*penalize_below)(double* y, const double* lo, double keep, double* push, std::size_t n);
    /// Where y > hi: y <- hi + (y - hi) * keep. push receives the decrease (0 elsewhere).
    void (*penalize_above)(double* y, const double* hi, double keep, double* push, std::size_t n);
};

const Kernels& scalar_kernels();
/// nullptr when the build has no AVX2 variant.
const Kernels* avx2_kernels();

/// Best variant supported by the running CPU, unless RBSDE_ISA=scalar is set.
Isa detect_isa();
bool isa_available(Isa isa);

/// Active kernel table; selected once on first use.
const Kernels& kernels();
/// Overrides the active variant; throws InvalidArgument if unavailable.
void select_isa(Isa isa);

const char* isa_name(Isa isa);

}  // namespace rbsde::simd
