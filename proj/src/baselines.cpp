#include "cb2/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>

#include "cb2/util/csv.hpp"
#include "cb2/util/hash.hpp"
#include "cb2/util/rng.hpp"

namespace cb2::baselines {

KnnModel knn_fit(std::vector<BitVector> x, std::vector<double> y, std::size_t k, KnnMetric metric) {
  if (x.size() != y.size()) throw BaselineError("knn: " + std::to_string(x.size()) + " rows but " + std::to_string(y.size()) + " targets");
  if (x.empty()) throw BaselineError("EmptyModel: knn needs training rows");
  if (k < 1 || k > x.size()) throw BaselineError("knn: k must be in [1, " + std::to_string(x.size()) + "]");
  KnnModel m;
  m.k = k;
  m.metric = metric;
  m.x = std::move(x);
  m.y = std::move(y);
  return m;
}

double knn_distance(KnnMetric metric, const BitVector& a, const BitVector& b) {
  if (a.size() != b.size()) throw BaselineError("knn: fingerprint length mismatch");
  std::size_t both = 0, either = 0, diff = 0;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    both += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
    either += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
    diff += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  }
  if (metric == KnnMetric::Euclidean) return std::sqrt(static_cast<double>(diff));
  if (either == 0) return 0.0;
  return 1.0 - static_cast<double>(both) / static_cast<double>(either);
}

std::vector<std::size_t> knn_neighbors(const KnnModel& m, const BitVector& q) {
  if (m.x.empty()) throw BaselineError("EmptyModel: knn model has no training rows");
  std::vector<std::pair<double, std::size_t>> d(m.x.size());
  for (std::size_t i = 0; i < m.x.size(); ++i) d[i] = {knn_distance(m.metric, m.x[i], q), i};
  const auto k = static_cast<std::ptrdiff_t>(std::min(m.k, d.size()));
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<std::size_t> out;
  for (std::ptrdiff_t i = 0; i < k; ++i) out.push_back(d[static_cast<std::size_t>(i)].second);
  return out;
}

double knn_predict(const KnnModel& m, const BitVector& q) {
  const auto nb = knn_neighbors(m, q);
  double s = 0.0;
  for (std::size_t i : nb) s += m.y[i];
  return s / static_cast<double>(nb.size());
}

// --- forest -----------------------------------------------------------------

double Tree::predict(const BitVector& x) const {
  int n = 0;
  while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = x.test(static_cast<std::size_t>(node.feature)) ? node.right : node.left;
  }
  return nodes[static_cast<std::size_t>(n)].value;
}

std::size_t Tree::leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

namespace {

struct TreeBuilder {
  const std::vector<std::vector<std::uint32_t>>& on_bits;
  std::span<const double> y;
  const ForestParams& params;
  std::size_t nbits;
  Rng rng;
  Tree tree;
  std::vector<double> sum_f;
  std::vector<std::size_t> count_f;
  std::vector<char> candidate;
  std::vector<std::uint32_t> features;

  TreeBuilder(const std::vector<std::vector<std::uint32_t>>& bits, std::span<const double> targets,
              const ForestParams& p, std::size_t n, std::uint64_t seed)
      : on_bits(bits), y(targets), params(p), nbits(n), rng(seed), sum_f(n), count_f(n), candidate(n), features(n) {
    std::iota(features.begin(), features.end(), 0U);
  }

  int build(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double total = 0.0;
    for (std::size_t r : rows) total += y[r];
    const double n = static_cast<double>(rows.size());
    tree.nodes[static_cast<std::size_t>(id)].value = total / n;
    tree.nodes[static_cast<std::size_t>(id)].count = rows.size();
    if (depth >= params.max_depth || rows.size() < 2 * params.min_leaf) return id;

    // Random feature subset for this split (partial Fisher-Yates).
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(params.feature_fraction * static_cast<double>(nbits)));
    for (std::size_t i = 0; i < m && i < nbits; ++i) {
      std::swap(features[i], features[i + rng.below(nbits - i)]);
      candidate[features[i]] = 1;
    }
    std::vector<std::uint32_t> touched;
    for (std::size_t r : rows) {
      for (std::uint32_t f : on_bits[r]) {
        if (!candidate[f]) continue;
        if (count_f[f] == 0) touched.push_back(f);
        ++count_f[f];
        sum_f[f] += y[r];
      }
    }
    int best = -1;
    double best_gain = 1e-12 * std::max(1.0, std::abs(total));
    const double base = total * total / n;
    std::sort(touched.begin(), touched.end());
    for (std::uint32_t f : touched) {
      const std::size_t nr = count_f[f];
      const std::size_t nl = rows.size() - nr;
      if (nr >= params.min_leaf && nl >= params.min_leaf) {
        const double sr = sum_f[f];
        const double sl = total - sr;
        const double gain = sr * sr / static_cast<double>(nr) + sl * sl / static_cast<double>(nl) - base;
        if (gain > best_gain) {
          best_gain = gain;
          best = static_cast<int>(f);
        }
      }
    }
    for (std::uint32_t f : touched) {
      count_f[f] = 0;
      sum_f[f] = 0.0;
    }
    for (std::size_t i = 0; i < m && i < nbits; ++i) candidate[features[i]] = 0;
    if (best < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      const bool set = std::binary_search(on_bits[r].begin(), on_bits[r].end(), static_cast<std::uint32_t>(best));
      (set ? right : left).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

ForestModel forest_fit(std::span<const BitVector> x, std::span<const double> y, const ForestParams& params,
                       std::uint64_t seed) {
  if (x.size() != y.size()) throw BaselineError("forest: row/target count mismatch");
  if (params.n_trees == 0) throw BaselineError("forest: n_trees must be positive");
  if (params.min_leaf == 0) throw BaselineError("forest: min_leaf must be positive");
  if (x.size() < 2 * params.min_leaf) {
    throw BaselineError("forest: need at least " + std::to_string(2 * params.min_leaf) + " rows");
  }
  ForestModel m;
  m.params = params;
  m.seed = seed;
  m.nbits = x.front().size();
  m.degenerate = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });

  std::vector<std::vector<std::uint32_t>> on_bits(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != m.nbits) throw BaselineError("forest: fingerprint length mismatch");
    for (std::size_t b : x[i].on_bits()) on_bits[i].push_back(static_cast<std::uint32_t>(b));
  }

  const std::size_t n = x.size();
  m.trees.resize(params.n_trees);
  std::vector<std::vector<char>> in_bag(params.n_trees);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(params.n_trees); ++ti) {
    const auto t = static_cast<std::size_t>(ti);
    const std::uint64_t tree_seed = mix_seed(seed, t);
    Rng rng(tree_seed);
    std::vector<std::size_t> rows(n);
    in_bag[t].assign(n, 0);
    if (params.bootstrap) {
      for (auto& r : rows) {
        r = rng.below(n);
        in_bag[t][r] = 1;
      }
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      std::fill(in_bag[t].begin(), in_bag[t].end(), 1);
    }
    TreeBuilder b(on_bits, y, params, m.nbits, mix_seed(tree_seed, 1));
    b.build(rows, 0);
    m.trees[t] = std::move(b.tree);
  }

  double se = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t t = 0; t < params.n_trees; ++t) {
      if (in_bag[t][i]) continue;
      s += m.trees[t].predict(x[i]);
      ++c;
    }
    if (c == 0) continue;
    const double e = s / static_cast<double>(c) - y[i];
    se += e * e;
    ++counted;
  }
  m.oob_mse = counted ? se / static_cast<double>(counted) : std::nan("");
  return m;
}

double forest_predict(const ForestModel& m, const BitVector& x) {
  if (m.trees.empty()) throw BaselineError("EmptyModel: forest has no trees");
  double s = 0.0;
  for (const auto& t : m.trees) s += t.predict(x);
  return s / static_cast<double>(m.trees.size());
}

// --- ridge ------------------------------------------------------------------

RidgeModel ridge_fit(std::span<const BitVector> x, std::span<const double> y, double lambda, double tol) {
  if (x.size() != y.size()) throw BaselineError("ridge: row/target count mismatch");
  if (x.empty()) throw BaselineError("EmptyModel: ridge needs training rows");
  if (!(lambda >= 0.0)) throw BaselineError("ridge: lambda must be non-negative");
  const std::size_t n = x.size();
  const std::size_t p = x.front().size();
  std::vector<std::vector<std::size_t>> bits(n);
  std::vector<double> mu(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    bits[i] = x[i].on_bits();
    for (std::size_t b : bits[i]) mu[b] += 1.0;
  }
  for (double& v : mu) v /= static_cast<double>(n);
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  // Xc = X - 1 mu^T.  Xc^T u = X^T u - mu * sum(u);  Xc v = X v - (mu . v).
  auto xc_t = [&](const std::vector<double>& u, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    double su = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      su += u[i];
      for (std::size_t b : bits[i]) out[b] += u[i];
    }
    for (std::size_t j = 0; j < p; ++j) out[j] -= mu[j] * su;
  };
  auto xc = [&](const std::vector<double>& v, std::vector<double>& out) {
    const double mv = std::inner_product(mu.begin(), mu.end(), v.begin(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = -mv;
      for (std::size_t b : bits[i]) s += v[b];
      out[i] = s;
    }
  };
  std::vector<double> tmp_n(n), tmp_p(p);
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    xc(v, tmp_n);
    xc_t(tmp_n, out);
    for (std::size_t j = 0; j < p; ++j) out[j] += lambda * v[j];
  };

  std::vector<double> yc(n);
  for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - ybar;
  std::vector<double> rhs(p);
  xc_t(yc, rhs);
  const double rhs_norm = std::sqrt(std::inner_product(rhs.begin(), rhs.end(), rhs.begin(), 0.0));

  RidgeModel m;
  m.lambda = lambda;
  m.weights.assign(p, 0.0);
  if (rhs_norm > 0.0) {
    std::vector<double> r = rhs, d = rhs, ad(p);
    double rr = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
    const std::size_t max_iter = 10 * p + 100;
    while (std::sqrt(rr) > tol * rhs_norm && m.iterations < max_iter) {
      apply(d, ad);
      const double dad = std::inner_product(d.begin(), d.end(), ad.begin(), 0.0);
      if (!(dad > 0.0)) break;
      const double alpha = rr / dad;
      for (std::size_t j = 0; j < p; ++j) {
        m.weights[j] += alpha * d[j];
        r[j] -= alpha * ad[j];
      }
      const double rr_next = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
      const double beta = rr_next / rr;
      rr = rr_next;
      for (std::size_t j = 0; j < p; ++j) d[j] = r[j] + beta * d[j];
      ++m.iterations;
    }
    // Report the true residual rather than the recursively updated one.
    apply(m.weights, tmp_p);
    double res = 0.0;
    for (std::size_t j = 0; j < p; ++j) res += (rhs[j] - tmp_p[j]) * (rhs[j] - tmp_p[j]);
    m.residual = std::sqrt(res) / rhs_norm;
  }
  m.bias = ybar - std::inner_product(mu.begin(), mu.end(), m.weights.begin(), 0.0);
  return m;
}

double ridge_predict(const RidgeModel& m, const BitVector& x) {
  if (x.size() != m.weights.size()) throw BaselineError("ridge: fingerprint length mismatch");
  double s = m.bias;
  for (std::size_t b : x.on_bits()) s += m.weights[b];
  return s;
}

// --- MLP --------------------------------------------------------------------

MlpModel::MlpModel(std::size_t nbits, const MlpParams& params, std::uint64_t seed)
    : nbits_(nbits),
      params_(params),
      w1_(nbits, params.hidden, true),
      b1_(1, params.hidden, true),
      w2_(params.hidden, 1, true),
      b2_(1, 1, true) {
  auto init = [&](tensor::Tensor& t, const char* name) {
    Rng rng(mix_seed(seed, fnv1a(name)));
    const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (double& v : t.values()) v = rng.uniform(-limit, limit);
  };
  init(w1_, "mlp.w1");
  init(w2_, "mlp.w2");
}

tensor::NamedTensors MlpModel::state() { return {{"mlp.w1", w1_}, {"mlp.b1", b1_}, {"mlp.w2", w2_}, {"mlp.b2", b2_}}; }

tensor::Tensor MlpModel::forward(tensor::Tape& t, std::span<const std::size_t> rows, std::uint64_t dropout_seed) {
  tensor::Tensor x(rows.size(), nbits_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t b : inputs_[rows[i]].on_bits()) x.at(i, b) = 1.0;
  }
  tensor::Tensor h = tensor::relu(t, tensor::add(t, tensor::matmul(t, x, w1_), b1_));
  h = tensor::dropout(t, h, params_.dropout, dropout_seed);
  return tensor::add(t, tensor::matmul(t, h, w2_), b2_);
}

void write_predictions_csv(std::ostream& out, std::span<const std::string> ids, const std::string& model,
                           const std::string& task, std::span<const double> predictions) {
  out << "compound_id,model,task,prediction\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    csv::write_row(out, {ids[i], model, task, csv::format_double(predictions[i])});
  }
}

}  // namespace cb2::baselines
