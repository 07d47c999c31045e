#include <atomic>
#include <cstdlib>
#include <string>

#include "glassvae/kernels.hpp"

namespace glassvae::kernels {

#if defined(GLASSVAE_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

const KernelTable* avx2_table() {
#if defined(GLASSVAE_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_kernels() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* pick_default() {
    const char* env = std::getenv("GLASSVAE_SIMD");
    if (env != nullptr && std::string(env) == "scalar") return &scalar_table();
    if (const KernelTable* t = avx2_table()) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{pick_default()};
    return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(std::string_view name) {
    if (name == "scalar") {
        slot().store(&scalar_table(), std::memory_order_release);
        return true;
    }
    if (name == "avx2") {
        const KernelTable* t = avx2_table();
        if (t == nullptr) return false;
        slot().store(t, std::memory_order_release);
        return true;
    }
    if (name == "auto") {
        slot().store(pick_default(), std::memory_order_release);
        return true;
    }
    return false;
}

}  // namespace glassvae::kernels
