#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cb2/baselines.hpp"
#include "cb2/util/rng.hpp"

using namespace cb2;
using namespace cb2::baselines;

namespace {

BitVector random_bits(Rng& rng, std::size_t n, double p) {
  BitVector b(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(p)) b.set(i);
  }
  return b;
}

// Dense Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace

TEST(Knn, NeighboursMatchBruteForce) {
  Rng rng(3);
  std::vector<BitVector> x;
  std::vector<double> y;
  for (int i = 0; i < 80; ++i) {
    x.push_back(random_bits(rng, 64, 0.2));
    y.push_back(rng.uniform(4, 9));
  }
  for (auto metric : {KnnMetric::Tanimoto, KnnMetric::Euclidean}) {
    const auto m = knn_fit(x, y, 5, metric);
    for (int q = 0; q < 20; ++q) {
      const auto query = random_bits(rng, 64, 0.2);
      std::vector<std::size_t> idx(x.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
        return knn_distance(metric, query, x[a]) < knn_distance(metric, query, x[b]);
      });
      idx.resize(5);
      EXPECT_EQ(knn_neighbors(m, query), idx);
      double mean = 0;
      for (auto i : idx) mean += y[i];
      EXPECT_NEAR(knn_predict(m, query), mean / 5.0, 1e-12);
    }
  }
}

TEST(Knn, DistanceValues) {
  BitVector a(8), b(8);
  a.set(0);
  a.set(1);
  b.set(1);
  b.set(2);
  EXPECT_DOUBLE_EQ(knn_distance(KnnMetric::Tanimoto, a, b), 1.0 - 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(knn_distance(KnnMetric::Euclidean, a, b), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(knn_distance(KnnMetric::Tanimoto, BitVector(8), BitVector(8)), 0.0);
}

TEST(Knn, RejectsBadInput) {
  EXPECT_THROW(knn_fit({}, {}, 3), BaselineError);
  EXPECT_THROW(knn_fit({BitVector(8)}, {1.0}, 0), BaselineError);
}

TEST(Forest, LearnsABitRuleAndIsSeeded) {
  Rng rng(5);
  std::vector<BitVector> x;
  std::vector<double> y;
  for (int i = 0; i < 300; ++i) {
    x.push_back(random_bits(rng, 32, 0.5));
    y.push_back(5.0 + 2.0 * x.back().test(3) + 1.0 * x.back().test(7));
  }
  ForestParams p;
  p.n_trees = 30;
  const auto m = forest_fit(x, y, p, 9);
  const auto m2 = forest_fit(x, y, p, 9);
  double se = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto q = random_bits(rng, 32, 0.5);
    const double truth = 5.0 + 2.0 * q.test(3) + q.test(7);
    se += (forest_predict(m, q) - truth) * (forest_predict(m, q) - truth);
    EXPECT_EQ(forest_predict(m, q), forest_predict(m2, q));
  }
  EXPECT_LT(std::sqrt(se / 100.0), 0.25);
  EXPECT_EQ(m.trees.size(), 30u);
  EXPECT_TRUE(std::isfinite(m.oob_mse));
}

TEST(Forest, ConstantTargetIsDegenerate) {
  std::vector<BitVector> x(10, BitVector(16));
  std::vector<double> y(10, 6.5);
  x[2].set(4);
  const auto m = forest_fit(x, y, ForestParams{}, 1);
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(forest_predict(m, x[2]), 6.5);
}

TEST(Ridge, MatchesClosedFormSolution) {
  Rng rng(8);
  const std::size_t n = 40, d = 6;
  std::vector<BitVector> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(random_bits(rng, d, 0.4));
    y.push_back(rng.normal(6, 1));
  }
  const double lambda = 0.7;
  std::vector<double> mx(d, 0.0);
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mx[j] += x[i].test(j) / static_cast<double>(n);
    my += y[i] / static_cast<double>(n);
  }
  std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
  std::vector<double> rhs(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double xj = x[i].test(j) - mx[j];
      rhs[j] += xj * (y[i] - my);
      for (std::size_t k = 0; k < d; ++k) a[j][k] += xj * (x[i].test(k) - mx[k]);
    }
  }
  for (std::size_t j = 0; j < d; ++j) a[j][j] += lambda;
  const auto w = solve(a, rhs);
  double b = my;
  for (std::size_t j = 0; j < d; ++j) b -= w[j] * mx[j];

  const auto m = ridge_fit(x, y, lambda, 1e-12);
  ASSERT_EQ(m.weights.size(), d);
  for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(m.weights[j], w[j], 1e-9);
  EXPECT_NEAR(m.bias, b, 1e-9);
  double pred = m.bias;
  for (std::size_t j = 0; j < d; ++j) pred += x[0].test(j) * m.weights[j];
  EXPECT_NEAR(ridge_predict(m, x[0]), pred, 1e-12);
}

TEST(Ridge, RejectsNegativeLambda) {
  std::vector<BitVector> x(3, BitVector(4));
  std::vector<double> y{1, 2, 3};
  EXPECT_THROW(ridge_fit(x, y, -1.0), BaselineError);
}

TEST(Mlp, FitsASimpleBitRule) {
  Rng rng(12);
  std::vector<BitVector> x;
  std::vector<double> y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(random_bits(rng, 16, 0.5));
    y.push_back(x.back().test(0) ? 7.0 : 5.0);
  }
  MlpParams p;
  p.hidden = 16;
  p.dropout = 0.0;
  MlpModel m(16, p, 4);
  m.set_inputs(x);
  m.output_bias().values()[0] = 6.0;
  std::vector<std::size_t> tr(160), va(40);
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(va.begin(), va.end(), 160);
  train::TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.max_epochs = 60;
  const auto log = train::fit(m, y, tr, va, cfg);
  EXPECT_LT(log.best_val_loss, 0.05);
  EXPECT_LT(log.best_val_loss, log.initial_val_loss);
}

TEST(Predictions, CsvLayout) {
  std::ostringstream out;
  const std::vector<std::string> ids{"a", "b"};
  const std::vector<double> p{6.5, 7.0};
  write_predictions_csv(out, ids, "knn", "reg", p);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "compound_id,model,task,prediction");
  EXPECT_NE(out.str().find("a,knn,reg,6.5"), std::string::npos);
}
