// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include "dagcn/kernels.hpp"

#include <cmath>
#include <vector>
#include <immintrin.h>

namespace dagcn::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// c row block [j, j+16) accumulated over p, a accessed with stride a_step.
inline void row_block16(std::size_t k, const double* a, std::size_t a_step, const double* b, std::size_t n,
                        double* c) {
    __m256d c0 = _mm256_loadu_pd(c);
    __m256d c1 = _mm256_loadu_pd(c + 4);
    __m256d c2 = _mm256_loadu_pd(c + 8);
    __m256d c3 = _mm256_loadu_pd(c + 12);
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_broadcast_sd(a + p * a_step);
        const double* brow = b + p * n;
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), c1);
        c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 8), c2);
        c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 12), c3);
    }
    _mm256_storeu_pd(c, c0);
    _mm256_storeu_pd(c + 4, c1);
    _mm256_storeu_pd(c + 8, c2);
    _mm256_storeu_pd(c + 12, c3);
}

inline void row_block4(std::size_t k, const double* a, std::size_t a_step, const double* b, std::size_t n,
                       double* c) {
    __m256d c0 = _mm256_loadu_pd(c);
    for (std::size_t p = 0; p < k; ++p) {
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p * a_step), _mm256_loadu_pd(b + p * n), c0);
    }
    _mm256_storeu_pd(c, c0);
}

// One output row: c[0..n) += sum_p a[p * a_step] * b[p, 0..n)
inline void output_row(std::size_t k, const double* a, std::size_t a_step, const double* b, std::size_t n,
                       double* c) {
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) row_block16(k, a, a_step, b + j, n, c + j);
    for (; j + 4 <= n; j += 4) row_block4(k, a, a_step, b + j, n, c + j);
    for (; j < n; ++j) {
        double s = c[j];
        for (std::size_t p = 0; p < k; ++p) s = std::fma(a[p * a_step], b[p * n + j], s);
        c[j] = s;
    }
}

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) output_row(k, a + i * k, 1, b, n, c + i * n);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) output_row(k, a + i, m, b, n, c + i * n);
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
    }
    for (; i + 4 <= n; i += 4) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
    if (m < 4 || n < 4) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(k, a + i * k, b + j * k);
        }
        return;
    }
    // Transpose b once so the row-streaming nn kernel does the work.
    thread_local std::vector<double> bt;
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    }
    gemm_nn(m, k, n, a, bt.data(), c);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

constexpr KernelTable kAvx2{Backend::Avx2, "avx2", gemm_nn, gemm_nt, gemm_tn, axpy, dot};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace dagcn::kernels
