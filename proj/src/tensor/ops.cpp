#include "cb2/tensor/ops.hpp"

#include <algorithm>
#include <cmath>

#include "cb2/kernels.hpp"
#include "cb2/util/rng.hpp"

namespace cb2::tensor {

namespace {

bool tracks(const Tape& t, std::initializer_list<const Tensor*> inputs) {
  if (!t.recording()) return false;
  for (const Tensor* x : inputs) {
    if (x->requires_grad()) return true;
  }
  return false;
}

std::string dims(std::size_t r, std::size_t c) { return shape_string({r, c}); }

void accumulate(const Tensor& dst, const double* src) {
  auto& g = dst.grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
}

}  // namespace

void SparseMatrix::add_row(std::span<const std::pair<std::size_t, double>> entries) {
  for (const auto& [c, v] : entries) {
    col_idx.push_back(c);
    val.push_back(v);
  }
  row_ptr.push_back(col_idx.size());
  ++rows;
}

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul", b.shape(), dims(a.cols(), b.cols()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const bool track = tracks(t, {&a, &b});
  Tensor out(m, n, track);
  kernels::gemm(m, n, k, a.data(), b.data(), out.data());
  if (track) {
    t.push([a, b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      if (a.requires_grad()) kernels::gemm_nt(m, k, n, g, b.data(), a.grad().data());
      if (b.requires_grad()) kernels::gemm_tn(k, n, m, a.data(), g, b.grad().data());
    });
  }
  return out;
}

Tensor matmul_nt(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt", b.shape(), "[*," + std::to_string(a.cols()) + "]");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  const bool track = tracks(t, {&a, &b});
  Tensor out(m, n, track);
  kernels::gemm_nt(m, n, k, a.data(), b.data(), out.data());
  if (track) {
    t.push([a, b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      if (a.requires_grad()) kernels::gemm(m, k, n, g, b.data(), a.grad().data());
      if (b.requires_grad()) kernels::gemm_tn(n, k, m, g, a.data(), b.grad().data());
    });
  }
  return out;
}

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
  const bool row_bias = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
  if (!row_bias && a.shape() != b.shape()) throw ShapeError("add", b.shape(), shape_string(a.shape()) + " or " + dims(1, a.cols()));
  const std::size_t m = a.rows(), n = a.cols();
  const bool track = tracks(t, {&a, &b});
  Tensor out(m, n, track);
  double* o = out.data();
  const double* x = a.data();
  const double* y = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* yr = row_bias ? y : y + i * n;
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] = x[i * n + j] + yr[j];
  }
  if (track) {
    t.push([a, b, out, m, n, row_bias]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      if (a.requires_grad()) accumulate(a, g);
      if (b.requires_grad()) {
        if (!row_bias) {
          accumulate(b, g);
        } else {
          auto& gb = b.grad();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("mul", b.shape(), shape_string(a.shape()));
  const bool track = tracks(t, {&a, &b});
  Tensor out(a.rows(), a.cols(), track);
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (track) {
    t.push([a, b, out]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a.data()[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& t, const Tensor& a, double s) {
  const bool track = tracks(t, {&a});
  Tensor out(a.rows(), a.cols(), track);
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * s;
  if (track) {
    t.push([a, out, s]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

Tensor concat_rows(Tape& t, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows", {}, "at least one part");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ShapeError("concat_rows", p.shape(), "[*," + std::to_string(n) + "]");
    m += p.rows();
    track = track || (t.recording() && p.requires_grad());
  }
  Tensor out(m, n, track);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.numel();
  }
  if (track) {
    std::vector<Tensor> ins(parts.begin(), parts.end());
    t.push([ins, out]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      std::size_t off = 0;
      for (auto& p : ins) {
        if (p.requires_grad()) accumulate(p, g + off);
        off += p.numel();
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape& t, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols", {}, "at least one part");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.rows() != m) throw ShapeError("concat_cols", p.shape(), "[" + std::to_string(m) + ",*]");
    n += p.cols();
    track = track || (t.recording() && p.requires_grad());
  }
  Tensor out(m, n, track);
  std::size_t c0 = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(p.data() + i * w, w, out.data() + i * n + c0);
    }
    c0 += w;
  }
  if (track) {
    std::vector<Tensor> ins(parts.begin(), parts.end());
    t.push([ins, out, m, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      std::size_t c0 = 0;
      for (auto& p : ins) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto& gp = p.grad();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * n + c0 + j];
          }
        }
        c0 += w;
      }
    });
  }
  return out;
}

Tensor slice_rows(Tape& t, const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows", a.shape(), "at least " + std::to_string(end) + " rows with begin <= end");
  }
  const std::size_t n = a.cols();
  const bool track = tracks(t, {&a});
  Tensor out(end - begin, n, std::vector<double>(a.data() + begin * n, a.data() + end * n), track);
  if (track) {
    t.push([a, out, begin, n]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
    });
  }
  return out;
}

Tensor softmax_lastdim(Tape& t, const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  const bool track = tracks(t, {&a});
  Tensor out(m, n, track);
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = a.data() + i * n;
    double* y = out.data() + i * n;
    const double mx = *std::max_element(x, x + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= s;
  }
  if (track) {
    t.push([a, out, m, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      const double* y = out.data();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
      }
    });
  }
  return out;
}

Tensor relu(Tape& t, const Tensor& a) {
  const bool track = tracks(t, {&a});
  Tensor out(a.rows(), a.cols(), track);
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  if (track) {
    t.push([a, out]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        if (a.data()[i] > 0.0) ga[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape& t, const Tensor& a) {
  const bool track = tracks(t, {&a});
  Tensor out(a.rows(), a.cols(), track);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double z = a.data()[i];
    out.data()[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  if (track) {
    t.push([a, out]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const double y = out.data()[i];
        ga[i] += g[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

Tensor layernorm_lastdim(Tape& t, const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n) throw ShapeError("layernorm_lastdim", gamma.shape(), dims(1, n));
  if (beta.rows() != 1 || beta.cols() != n) throw ShapeError("layernorm_lastdim", beta.shape(), dims(1, n));
  const bool track = tracks(t, {&x, &gamma, &beta});
  Tensor out(m, n, track);
  std::vector<double> xhat(m * n);
  std::vector<double> rstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = x.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xr[j] - mu) * rstd[i];
      out.data()[i * n + j] = xhat[i * n + j] * gamma.data()[j] + beta.data()[j];
    }
  }
  if (track) {
    t.push([x, gamma, beta, out, xhat = std::move(xhat), rstd = std::move(rstd), m, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      if (gamma.requires_grad() || beta.requires_grad()) {
        auto& gg = gamma.grad();
        auto& gb = beta.grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            gg[j] += g[i * n + j] * xhat[i * n + j];
            gb[j] += g[i * n + j];
          }
        }
      }
      if (x.requires_grad()) {
        auto& gx = x.grad();
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < m; ++i) {
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double gh = g[i * n + j] * gamma.data()[j];
            s1 += gh;
            s2 += gh * xhat[i * n + j];
          }
          for (std::size_t j = 0; j < n; ++j) {
            const double gh = g[i * n + j] * gamma.data()[j];
            gx[i * n + j] += rstd[i] * (gh - inv_n * s1 - xhat[i * n + j] * inv_n * s2);
          }
        }
      }
    });
  }
  return out;
}

Tensor dropout(Tape& t, const Tensor& x, double p, std::uint64_t seed) {
  if (!t.training() || p <= 0.0) return x;
  if (p >= 1.0) throw ShapeError("dropout", {}, "p in [0, 1)");
  const bool track = tracks(t, {&x});
  Tensor out(x.rows(), x.cols(), track);
  std::vector<double> mask(x.numel());
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out.data()[i] = x.data()[i] * mask[i];
  }
  if (track) {
    t.push([x, out, mask = std::move(mask)]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }
  return out;
}

Tensor embedding_lookup(Tape& t, const Tensor& table, std::span<const int> ids) {
  const std::size_t n = table.cols();
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw ShapeError("embedding_lookup", table.shape(), "a row for id " + std::to_string(id));
    }
  }
  const bool track = tracks(t, {&table});
  Tensor out(ids.size(), n, track);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(table.data() + static_cast<std::size_t>(ids[i]) * n, n, out.data() + i * n);
  }
  if (track) {
    std::vector<int> idv(ids.begin(), ids.end());
    t.push([table, out, idv = std::move(idv), n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      auto& gt = table.grad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        double* row = gt.data() + static_cast<std::size_t>(idv[i]) * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += g[i * n + j];
      }
    });
  }
  return out;
}

Tensor gather_rows(Tape& t, const Tensor& x, std::span<const int> idx) {
  const std::size_t n = x.cols();
  for (int id : idx) {
    if (id >= 0 && static_cast<std::size_t>(id) >= x.rows()) {
      throw ShapeError("gather_rows", x.shape(), "a row for index " + std::to_string(id));
    }
  }
  const bool track = tracks(t, {&x});
  Tensor out(idx.size(), n, track);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= 0) std::copy_n(x.data() + static_cast<std::size_t>(idx[i]) * n, n, out.data() + i * n);
  }
  if (track) {
    std::vector<int> iv(idx.begin(), idx.end());
    t.push([x, out, iv = std::move(iv), n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < iv.size(); ++i) {
        if (iv[i] < 0) continue;
        double* row = gx.data() + static_cast<std::size_t>(iv[i]) * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += g[i * n + j];
      }
    });
  }
  return out;
}

Tensor spmm(Tape& t, const SparseMatrix& s, const Tensor& x) {
  if (s.cols != x.rows()) throw ShapeError("spmm", x.shape(), "[" + std::to_string(s.cols) + ",*]");
  const std::size_t n = x.cols();
  const bool track = tracks(t, {&x});
  Tensor out(s.rows, n, track);
  for (std::size_t i = 0; i < s.rows; ++i) {
    double* o = out.data() + i * n;
    for (std::size_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e) {
      const double v = s.val[e];
      const double* xr = x.data() + s.col_idx[e] * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += v * xr[j];
    }
  }
  if (track) {
    t.push([s, x, out, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e) {
          const double v = s.val[e];
          double* row = gx.data() + s.col_idx[e] * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += v * g[i * n + j];
        }
      }
    });
  }
  return out;
}

Tensor mean_rows(Tape& t, const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  if (m == 0) throw ShapeError("mean_rows", a.shape(), "at least one row");
  const bool track = tracks(t, {&a});
  Tensor out(1, n, track);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data()[j] += a.data()[i * n + j];
  }
  for (std::size_t j = 0; j < n; ++j) out.data()[j] /= static_cast<double>(m);
  if (track) {
    t.push([a, out, m, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      auto& ga = a.grad();
      const double inv = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j] * inv;
      }
    });
  }
  return out;
}

Tensor sum(Tape& t, const Tensor& a) {
  const bool track = tracks(t, {&a});
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out(1, 1, {s}, track);
  if (track) {
    t.push([a, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      for (double& v : a.grad()) v += g;
    });
  }
  return out;
}

Tensor mse_loss(Tape& t, const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) throw ShapeError("mse_loss", target.shape(), shape_string(pred.shape()));
  const bool track = tracks(t, {&pred});
  const std::size_t n = pred.numel();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.data()[i] - target.data()[i];
    s += d * d;
  }
  Tensor out(1, 1, {s / static_cast<double>(n)}, track);
  if (track) {
    t.push([pred, target, out, n]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0] * 2.0 / static_cast<double>(n);
      auto& gp = pred.grad();
      for (std::size_t i = 0; i < n; ++i) gp[i] += g * (pred.data()[i] - target.data()[i]);
    });
  }
  return out;
}

Tensor bce_with_logits_loss(Tape& t, const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("bce_with_logits_loss", targets.shape(), shape_string(logits.shape()));
  }
  const bool track = tracks(t, {&logits});
  const std::size_t n = logits.numel();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.data()[i];
    const double y = targets.data()[i];
    s += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Tensor out(1, 1, {s / static_cast<double>(n)}, track);
  if (track) {
    t.push([logits, targets, out, n]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0] / static_cast<double>(n);
      auto& gl = logits.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double z = logits.data()[i];
        const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        gl[i] += g * (p - targets.data()[i]);
      }
    });
  }
  return out;
}

}  // namespace cb2::tensor
