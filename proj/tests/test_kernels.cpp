#include <doctest.h>

#include <array>
#include <random>
#include <vector>

#include "glassvae/kernels.hpp"

using namespace glassvae;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, scale = 1e-300;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / scale;
}

// Naive triple loop, independent of both kernel tables.
std::vector<double> reference_gemm(std::size_t n, std::size_t k, std::size_t m, const std::vector<double>& a,
                                   const std::vector<double>& b) {
    std::vector<double> c(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            long double acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += static_cast<long double>(a[i * k + p]) * b[p * m + j];
            c[i * m + j] = static_cast<double>(acc);
        }
    return c;
}

std::vector<const kernels::KernelTable*> tables() {
    std::vector<const kernels::KernelTable*> t{&kernels::scalar_table()};
    if (auto* avx = kernels::avx2_table()) t.push_back(avx);
    return t;
}

}  // namespace

TEST_CASE("gemm variants match a naive reference for every kernel table") {
    std::mt19937_64 rng(7);
    const std::vector<std::array<std::size_t, 3>> dims{{1, 1, 1}, {3, 5, 7}, {16, 9, 33}, {64, 36, 32}, {5, 1, 13}};
    for (auto [n, k, m] : dims) {
        const auto a = random_vec(n * k, rng);
        const auto b = random_vec(k * m, rng);
        const auto ref = reference_gemm(n, k, m, a, b);
        // aᵀ-layout copy for gemm_tn, bᵀ-layout copy for gemm_nt
        std::vector<double> at(k * n), bt(m * k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) at[p * n + i] = a[i * k + p];
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = b[p * m + j];
        for (const auto* t : tables()) {
            CAPTURE(t->name);
            std::vector<double> c(n * m, 0.0);
            t->gemm_nn(n, k, m, a.data(), b.data(), c.data());
            CHECK(max_rel(c, ref) < 1e-13);

            std::vector<double> c2(n * m, 0.0);
            t->gemm_tn(k, n, m, at.data(), b.data(), c2.data());
            CHECK(max_rel(c2, ref) < 1e-13);

            std::vector<double> c3(n * m, 0.0);
            t->gemm_nt(n, m, k, a.data(), bt.data(), c3.data());
            CHECK(max_rel(c3, ref) < 1e-13);
        }
    }
}

TEST_CASE("SIMD and scalar kernels agree on vector primitives") {
    const auto* avx = kernels::avx2_table();
    if (avx == nullptr) {
        MESSAGE("AVX2 variant unavailable on this host; equivalence checks skipped");
        return;
    }
    const auto& sc = kernels::scalar_table();
    std::mt19937_64 rng(11);
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 31u, 257u}) {
        CAPTURE(n);
        const auto x = random_vec(n, rng);
        const auto y = random_vec(n, rng);
        CHECK(avx->dot(n, x.data(), y.data()) == doctest::Approx(sc.dot(n, x.data(), y.data())).epsilon(1e-13));
        CHECK(avx->sum_sq(n, x.data()) == doctest::Approx(sc.sum_sq(n, x.data())).epsilon(1e-13));

        auto y1 = y, y2 = y;
        sc.axpy(n, 0.37, x.data(), y1.data());
        avx->axpy(n, 0.37, x.data(), y2.data());
        if (n) CHECK(max_rel(y2, y1) < 1e-15);

        std::vector<double> h1(n), h2(n);
        sc.hadamard(n, x.data(), y.data(), h1.data());
        avx->hadamard(n, x.data(), y.data(), h2.data());
        CHECK(h1 == h2);
    }
}

TEST_CASE("kernel selection") {
    CHECK(kernels::select("scalar"));
    CHECK(std::string(kernels::active().name) == "scalar");
    CHECK_FALSE(kernels::select("sse9"));
    CHECK(kernels::select("auto"));
    if (kernels::avx2_table() != nullptr) {
        CHECK(kernels::select("avx2"));
        CHECK(std::string(kernels::active().name) == "avx2");
    }
    kernels::select("auto");
}
