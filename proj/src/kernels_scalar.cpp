#include "glassvae/kernels.hpp"

namespace glassvae::kernels {
namespace {

void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = b + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
        }
    }
}

void gemm_tn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* brow = b + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            if (aip == 0.0) continue;
            double* crow = c + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
        }
    }
}

double dot(std::size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) c[i * k + p] += dot(m, a + i * m, b + p * m);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void hadamard(std::size_t n, const double* x, const double* y, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

double sum_sq(std::size_t n, const double* x) { return dot(n, x, x); }

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{"scalar", gemm_nn, gemm_tn, gemm_nt, axpy, dot, hadamard, sum_sq};
    return table;
}

}  // namespace glassvae::kernels
