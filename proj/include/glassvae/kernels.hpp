#pragma once
// Dense float64 inner loops used by the autodiff engine.
//
// Every kernel has a portable scalar reference implementation; an AVX2/FMA
// variant is compiled into a separate translation unit and picked at runtime
// when the CPU supports it. Set GLASSVAE_SIMD=scalar to force the reference
// path.

#include <cstddef>
#include <span>
#include <string_view>

namespace glassvae::kernels {

struct KernelTable {
    const char* name;
    // c[n×m] += a[n×k] · b[k×m]
    void (*gemm_nn)(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c);
    // c[k×m] += aᵀ · b, with a[n×k] and b[n×m]
    void (*gemm_tn)(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c);
    // c[n×k] += a · bᵀ, with a[n×m] and b[k×m]
    void (*gemm_nt)(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c);
    // y += alpha · x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    double (*dot)(std::size_t n, const double* x, const double* y);
    // out = x ⊙ y
    void (*hadamard)(std::size_t n, const double* x, const double* y, double* out);
    double (*sum_sq)(std::size_t n, const double* x);
};

const KernelTable& scalar_table();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// The table used by the engine. Chosen once on first use.
const KernelTable& active();

// Force a variant ("scalar", "avx2" or "auto"). Returns false if unavailable.
bool select(std::string_view name);

// Span front-ends over the active table.

inline void gemm_nn(std::size_t n, std::size_t k, std::size_t m, std::span<const double> a,
                    std::span<const double> b, std::span<double> c) {
    active().gemm_nn(n, k, m, a.data(), b.data(), c.data());
}

inline void gemm_tn(std::size_t n, std::size_t k, std::size_t m, std::span<const double> a,
                    std::span<const double> b, std::span<double> c) {
    active().gemm_tn(n, k, m, a.data(), b.data(), c.data());
}

inline void gemm_nt(std::size_t n, std::size_t k, std::size_t m, std::span<const double> a,
                    std::span<const double> b, std::span<double> c) {
    active().gemm_nt(n, k, m, a.data(), b.data(), c.data());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(x.size(), alpha, x.data(), y.data());
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x.size(), x.data(), y.data());
}

inline void hadamard(std::span<const double> x, std::span<const double> y, std::span<double> out) {
    active().hadamard(x.size(), x.data(), y.data(), out.data());
}

inline double sum_sq(std::span<const double> x) { return active().sum_sq(x.size(), x.data()); }

}  // namespace glassvae::kernels
