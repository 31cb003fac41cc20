#pragma once

#include <cstddef>

// Dense row-major matrix products. All three forms accumulate into C:
//   gemm:    C[m,n] += A[m,k]   * B[k,n]
//   gemm_tn: C[m,n] += A[k,m]^T * B[k,n]
//   gemm_nt: C[m,n] += A[m,k]   * B[n,k]^T
// Every output element is summed over k in ascending order, so the serial
// and parallel versions agree and results never depend on thread count.
namespace cb2::kernels {

namespace serial {
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
}  // namespace serial

namespace parallel {
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
}  // namespace parallel

using parallel::gemm;
using parallel::gemm_nt;
using parallel::gemm_tn;

// Applies CB2_THREADS (if set) as the OpenMP thread cap. Returns the cap in effect.
int configure_threads_from_env();
int max_threads();

}  // namespace cb2::kernels
