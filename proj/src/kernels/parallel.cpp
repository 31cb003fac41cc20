#include <omp.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "cb2/kernels.hpp"

namespace cb2::kernels {

namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;
constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 256;

// Rows [i0, i0+rows) of C += A' * B where row r of A' is read with stride
// `a_row` between rows and `a_col` between k entries.
inline void row_block(std::size_t rows, std::size_t n, std::size_t k, const double* a, std::size_t a_row,
                      std::size_t a_col, const double* b, double* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t j1 = j0 + kColBlock < n ? j0 + kColBlock : n;
    if (rows == kRowBlock) {
      double* c0 = c;
      double* c1 = c + n;
      double* c2 = c + 2 * n;
      double* c3 = c + 3 * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double a0 = a[p * a_col];
        const double a1 = a[a_row + p * a_col];
        const double a2 = a[2 * a_row + p * a_col];
        const double a3 = a[3 * a_row + p * a_col];
        const double* bp = b + p * n;
#pragma omp simd
        for (std::size_t j = j0; j < j1; ++j) {
          const double bv = bp[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    } else {
      for (std::size_t r = 0; r < rows; ++r) {
        double* cr = c + r * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a[r * a_row + p * a_col];
          const double* bp = b + p * n;
#pragma omp simd
          for (std::size_t j = j0; j < j1; ++j) cr[j] += av * bp[j];
        }
      }
    }
  }
}

void blocked(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_row, std::size_t a_col,
             const double* b, double* c) {
  const auto blocks = static_cast<std::ptrdiff_t>((m + kRowBlock - 1) / kRowBlock);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
    const std::size_t rows = i0 + kRowBlock <= m ? kRowBlock : m - i0;
    row_block(rows, n, k, a + i0 * a_row, a_row, a_col, b, c + i0 * n);
  }
}

}  // namespace

namespace parallel {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  blocked(m, n, k, a, k, 1, b, c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  blocked(m, n, k, a, 1, m, b, c);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  blocked(m, n, k, a, k, 1, bt.data(), c);
}

}  // namespace parallel

int configure_threads_from_env() {
  if (const char* env = std::getenv("CB2_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace cb2::kernels
