#include "dagcn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace dagcn::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(DAGCN_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* initial_table() noexcept {
    if (const char* env = std::getenv("DAGCN_KERNELS"); env != nullptr && std::string(env) == "scalar") {
        return &scalar_table();
    }
#if defined(DAGCN_HAVE_AVX2_KERNELS)
    if (cpu_has_avx2()) return &avx2_table();
#endif
    return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

void check_gemm(const Matrix& a, const Matrix& b, std::size_t a_inner, std::size_t b_inner, const char* what) {
    if (a_inner != b_inner) {
        throw DimensionError(std::string(what) + ": incompatible shapes " + a.shape() + " and " + b.shape());
    }
}

}  // namespace

bool supported(Backend backend) noexcept {
    switch (backend) {
        case Backend::Scalar: return true;
        case Backend::Avx2: return cpu_has_avx2();
    }
    return false;
}

Backend best_supported() noexcept { return supported(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar; }

const KernelTable& table(Backend backend) {
    if (!supported(backend)) throw ContractError("kernel backend not supported on this CPU/build");
    switch (backend) {
        case Backend::Scalar: return scalar_table();
#if defined(DAGCN_HAVE_AVX2_KERNELS)
        case Backend::Avx2: return avx2_table();
#else
        case Backend::Avx2: break;
#endif
    }
    return scalar_table();
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

void select(Backend backend) { current().store(&table(backend), std::memory_order_release); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_gemm(a, b, a.cols(), b.rows(), "matmul");
    Matrix c(a.rows(), b.cols());
    active().gemm_nn(a.rows(), a.cols(), b.cols(), a.data(), b.data(), c.data());
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_gemm(a, b, a.cols(), b.cols(), "matmul_nt");
    Matrix c(a.rows(), b.rows());
    active().gemm_nt(a.rows(), a.cols(), b.rows(), a.data(), b.data(), c.data());
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_gemm(a, b, a.rows(), b.rows(), "matmul_tn");
    Matrix c(a.cols(), b.cols());
    active().gemm_tn(a.cols(), a.rows(), b.cols(), a.data(), b.data(), c.data());
    return c;
}

}  // namespace dagcn::kernels
