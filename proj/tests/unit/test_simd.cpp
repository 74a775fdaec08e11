#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "rbsde/barriers.hpp"
#include "rbsde/simd/kernels.hpp"

using namespace rbsde;
using rbsde::simd::Kernels;

namespace {

const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 17, 1000};

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo = -3.0, double hi = 3.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& a : v) a = u(rng);
    return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
    return true;
}

void compare(const Kernels& ref, const Kernels& vec) {
    for (std::size_t n : kSizes) {
        CAPTURE(n);
        const auto a = random_vec(n, 1 + n), b = random_vec(n, 2 + n);
        const double d0 = ref.dot(a.data(), b.data(), n), d1 = vec.dot(a.data(), b.data(), n);
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
        CHECK(std::abs(d0 - d1) <= 1e-13 * (1.0 + scale));

        double s0, q0, s1, q1;
        ref.sum_sumsq(a.data(), n, &s0, &q0);
        vec.sum_sumsq(a.data(), n, &s1, &q1);
        CHECK(std::abs(s0 - s1) <= 1e-13 * (1.0 + q0));
        CHECK(std::abs(q0 - q1) <= 1e-13 * (1.0 + q0));

        auto y0 = b, y1 = b;
        ref.axpy(0.37, a.data(), y0.data(), n);
        vec.axpy(0.37, a.data(), y1.data(), n);
        CHECK(same_bits(y0, y1));

        std::vector<double> o0(n), o1(n);
        ref.euler_step(a.data(), b.data(), 0.01, 1.3, o0.data(), n);
        vec.euler_step(a.data(), b.data(), 0.01, 1.3, o1.data(), n);
        CHECK(same_bits(o0, o1));

        ref.clip_scale(a.data(), n, -2.0, 1.5, -0.25, 1.0 / 1.75, o0.data());
        vec.clip_scale(a.data(), n, -2.0, 1.5, -0.25, 1.0 / 1.75, o1.data());
        CHECK(same_bits(o0, o1));

        std::vector<double> m0(4 * n), m1(4 * n);
        ref.monomials(o0.data(), n, 3, m0.data());
        vec.monomials(o0.data(), n, 3, m1.data());
        CHECK(same_bits(m0, m1));

        auto lo = random_vec(n, 3 + n, -2.0, -0.5), hi = random_vec(n, 4 + n, 0.5, 2.0);
        if (n > 2) {
            lo[1] = -kInf;
            hi[2] = kInf;
        }
        std::vector<double> p0(n), p1(n), u0(n), u1(n), w0(n), w1(n);
        ref.project_band(a.data(), lo.data(), hi.data(), p0.data(), u0.data(), w0.data(), n);
        vec.project_band(a.data(), lo.data(), hi.data(), p1.data(), u1.data(), w1.data(), n);
        CHECK(same_bits(p0, p1));
        CHECK(same_bits(u0, u1));
        CHECK(same_bits(w0, w1));

        auto q = a, r = a;
        ref.penalize_below(q.data(), lo.data(), 0.3, u0.data(), n);
        vec.penalize_below(r.data(), lo.data(), 0.3, u1.data(), n);
        CHECK(same_bits(q, r));
        CHECK(same_bits(u0, u1));
        ref.penalize_above(q.data(), hi.data(), 0.3, u0.data(), n);
        vec.penalize_above(r.data(), hi.data(), 0.3, u1.data(), n);
        CHECK(same_bits(q, r));
        CHECK(same_bits(u0, u1));
    }
}

}  // namespace

TEST_SUITE("simd") {
    TEST_CASE("scalar reference semantics") {
        const auto& k = simd::scalar_kernels();
        const std::vector<double> y{-2.0, 0.0, 3.0}, lo{-1.0, -1.0, -kInf}, hi{1.0, 1.0, 2.0};
        std::vector<double> out(3), up(3), down(3);
        k.project_band(y.data(), lo.data(), hi.data(), out.data(), up.data(), down.data(), 3);
        CHECK(out == std::vector<double>{-1.0, 0.0, 2.0});
        CHECK(up == std::vector<double>{1.0, 0.0, 0.0});
        CHECK(down == std::vector<double>{0.0, 0.0, 1.0});

        auto p = y;
        std::vector<double> push(3);
        k.penalize_below(p.data(), lo.data(), 0.25, push.data(), 3);
        CHECK(p[0] == -1.25);
        CHECK(push == std::vector<double>{0.75, 0.0, 0.0});

        std::vector<double> cols(6);
        const std::vector<double> s{2.0, -1.0};
        k.monomials(s.data(), 2, 2, cols.data());
        CHECK(cols == std::vector<double>{1.0, 1.0, 2.0, -1.0, 4.0, 1.0});
    }

    TEST_CASE("vector kernels match the scalar reference") {
        const auto* avx = simd::avx2_kernels();
        if (!avx || !simd::isa_available(simd::Isa::avx2)) {
            MESSAGE("AVX2 variant not available on this machine");
            return;
        }
        compare(simd::scalar_kernels(), *avx);
    }

    TEST_CASE("isa selection") {
        const auto before = simd::kernels().isa;
        simd::select_isa(simd::Isa::scalar);
        CHECK(simd::kernels().isa == simd::Isa::scalar);
        if (simd::isa_available(simd::Isa::avx2)) {
            simd::select_isa(simd::Isa::avx2);
            CHECK(simd::kernels().isa == simd::Isa::avx2);
        }
        simd::select_isa(before);
        CHECK(std::string(simd::isa_name(simd::Isa::scalar)) == "scalar");
    }
}
