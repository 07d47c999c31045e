// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// is only entered after a runtime CPU check.

#include <immintrin.h>

#include "glassvae/kernels.hpp"

namespace glassvae::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline void axpy_row(std::size_t m, double alpha, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t j = 0;
    for (; j + 8 <= m; j += 8) {
        __m256d y0 = _mm256_loadu_pd(y + j);
        __m256d y1 = _mm256_loadu_pd(y + j + 4);
        y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j), y0);
        y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j + 4), y1);
        _mm256_storeu_pd(y + j, y0);
        _mm256_storeu_pd(y + j + 4, y1);
    }
    for (; j + 4 <= m; j += 4) {
        _mm256_storeu_pd(y + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
    }
    for (; j < m; ++j) y[j] += alpha * x[j];
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            if (aip == 0.0) continue;
            axpy_row(m, aip, b + p * m, crow);
        }
    }
}

void gemm_tn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* brow = b + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            if (aip == 0.0) continue;
            axpy_row(m, aip, brow, c + p * m);
        }
    }
}

void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) c[i * k + p] += dot(m, a + i * m, b + p * m);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) { axpy_row(n, alpha, x, y); }

void hadamard(std::size_t n, const double* x, const double* y, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

double sum_sq(std::size_t n, const double* x) { return dot(n, x, x); }

}  // namespace

const KernelTable& avx2_kernels() {
    static const KernelTable table{"avx2", gemm_nn, gemm_tn, gemm_nt, axpy, dot, hadamard, sum_sq};
    return table;
}

}  // namespace glassvae::kernels
