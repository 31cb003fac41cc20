#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cb2/tensor/tape.hpp"

namespace cb2::tensor {

// Constant sparse matrix in CSR form (GCN propagation, pooling).
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> val;

  void add_row(std::span<const std::pair<std::size_t, double>> entries);
};

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);     // a[m,k] b[k,n]
Tensor matmul_nt(Tape& t, const Tensor& a, const Tensor& b);  // a[m,k] b[n,k]^T
// Same shape, or b is a single row added to every row of a.
Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
Tensor scale(Tape& t, const Tensor& a, double s);
Tensor concat_rows(Tape& t, std::span<const Tensor> parts);
Tensor concat_cols(Tape& t, std::span<const Tensor> parts);
Tensor slice_rows(Tape& t, const Tensor& a, std::size_t begin, std::size_t end);
Tensor softmax_lastdim(Tape& t, const Tensor& a);
Tensor relu(Tape& t, const Tensor& a);
Tensor sigmoid(Tape& t, const Tensor& a);

inline constexpr double kLayerNormEps = 1e-5;
// Normalizes each row, then applies gamma[1,n] and beta[1,n].
Tensor layernorm_lastdim(Tape& t, const Tensor& x, const Tensor& gamma, const Tensor& beta);

// Identity in eval mode or for p == 0; otherwise zeroes each entry with
// probability p (mask drawn from `seed`) and scales survivors by 1/(1-p).
Tensor dropout(Tape& t, const Tensor& x, double p, std::uint64_t seed);

Tensor embedding_lookup(Tape& t, const Tensor& table, std::span<const int> ids);
// Row idx[i] of x, or a zero row where idx[i] < 0.
Tensor gather_rows(Tape& t, const Tensor& x, std::span<const int> idx);
// s * x with s a constant sparse matrix.
Tensor spmm(Tape& t, const SparseMatrix& s, const Tensor& x);

Tensor mean_rows(Tape& t, const Tensor& a);  // [1, cols]
Tensor sum(Tape& t, const Tensor& a);        // [1, 1]

// Mean squared error against a constant target of the same shape.
Tensor mse_loss(Tape& t, const Tensor& pred, const Tensor& target);
// Mean logistic loss; targets in [0, 1].
Tensor bce_with_logits_loss(Tape& t, const Tensor& logits, const Tensor& targets);

}  // namespace cb2::tensor
