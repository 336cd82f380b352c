#pragma once

#include <cstddef>
#include <string_view>

#include "dagcn/matrix.hpp"

// Dense inner loops used by the autodiff engine. Every kernel has a scalar
// reference version; vectorized variants are selected at runtime when the CPU
// supports them and are equivalence-tested against the reference.
namespace dagcn::kernels {

enum class Backend { Scalar, Avx2 };

/// All matrices row-major. Every gemm accumulates into c.
struct KernelTable {
    Backend backend;
    std::string_view name;
    /// c[m x n] += a[m x k] * b[k x n]
    void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
    /// c[m x n] += a[m x k] * b[n x k]^T
    void (*gemm_nt)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
    /// c[m x n] += a[k x m]^T * b[k x n]
    void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
    /// y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    double (*dot)(std::size_t n, const double* x, const double* y);
};

const KernelTable& scalar_table() noexcept;
#if defined(DAGCN_HAVE_AVX2_KERNELS)
const KernelTable& avx2_table() noexcept;
#endif

bool supported(Backend backend) noexcept;

/// Table for a specific backend; throws ContractError if unavailable here.
const KernelTable& table(Backend backend);

/// Currently selected table. Initially the best supported backend, unless
/// the environment variable DAGCN_KERNELS=scalar forces the reference path.
const KernelTable& active() noexcept;

/// Switch the process-wide backend. Not meant to be called while other
/// threads are running kernels.
void select(Backend backend);

Backend best_supported() noexcept;

/// RAII backend override, restores the previous selection.
class ScopedBackend {
public:
    explicit ScopedBackend(Backend backend) : previous_(active().backend) { select(backend); }
    ~ScopedBackend() { select(previous_); }
    ScopedBackend(const ScopedBackend&) = delete;
    ScopedBackend& operator=(const ScopedBackend&) = delete;

private:
    Backend previous_;
};

// Matrix-level helpers over the active table.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

}  // namespace dagcn::kernels
