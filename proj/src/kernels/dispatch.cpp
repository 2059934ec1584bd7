#include <cstdlib>
#include <string_view>

#include "csikf/kernels.hpp"

namespace csikf::kernels {

#if defined(CSIKF_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(CSIKF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }();
    return supported ? &avx2_kernel_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() {
    static const KernelTable* chosen = [] {
        const char* env = std::getenv("CSIKF_KERNELS");
        const std::string_view want = env ? env : "";
        if (want == "scalar") return &scalar_kernels();
        if (const KernelTable* fast = avx2_kernels()) return fast;
        return &scalar_kernels();
    }();
    return *chosen;
}

}  // namespace csikf::kernels
