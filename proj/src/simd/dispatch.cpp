#include <atomic>
#include <cstdlib>
#include <cstring>

#include "rbsde/error.hpp"
#include "rbsde/simd/kernels.hpp"

namespace rbsde::simd {

#ifdef RBSDE_HAVE_AVX2
const Kernels* avx2_kernels_impl();
#endif

const Kernels* avx2_kernels() {
#ifdef RBSDE_HAVE_AVX2
    return avx2_kernels_impl();
#else
    return nullptr;
#endif
}

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(RBSDE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

Isa detect_isa() {
    if (const char* forced = std::getenv("RBSDE_ISA"); forced && std::strcmp(forced, "scalar") == 0)
        return Isa::scalar;
    return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

namespace {

const Kernels* table_for(Isa isa) { return isa == Isa::avx2 ? avx2_kernels() : &scalar_kernels(); }

std::atomic<const Kernels*>& active() {
    static std::atomic<const Kernels*> table{table_for(detect_isa())};
    return table;
}

}  // namespace

const Kernels& kernels() { return *active().load(std::memory_order_acquire); }

void select_isa(Isa isa) {
    require(isa_available(isa), "select_isa: ", isa_name(isa), " is not supported on this CPU/build");
    active().store(table_for(isa), std::memory_order_release);
}

}  // namespace rbsde::simd
