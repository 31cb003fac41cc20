#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cb2/fingerprint.hpp"
#include "cb2/train.hpp"

namespace cb2::baselines {

using fp::BitVector;

class BaselineError : public Error {
 public:
  explicit BaselineError(const std::string& what) : Error(ErrorCategory::Model, what) {}
};

// --- k-nearest neighbours ---------------------------------------------------

enum class KnnMetric { Tanimoto, Euclidean };

struct KnnModel {
  std::size_t k = 5;
  KnnMetric metric = KnnMetric::Tanimoto;
  std::vector<BitVector> x;
  std::vector<double> y;
};

KnnModel knn_fit(std::vector<BitVector> x, std::vector<double> y, std::size_t k,
                 KnnMetric metric = KnnMetric::Tanimoto);
double knn_distance(KnnMetric metric, const BitVector& a, const BitVector& b);
// Indices of the k nearest training rows, nearest first; equal distances
// go to the lower index.
std::vector<std::size_t> knn_neighbors(const KnnModel& m, const BitVector& q);
// Mean target of the neighbours (the active fraction when targets are 0/1).
double knn_predict(const KnnModel& m, const BitVector& q);

// --- random forest ----------------------------------------------------------

struct ForestParams {
  std::size_t n_trees = 100;
  int max_depth = 24;
  std::size_t min_leaf = 1;
  double feature_fraction = 0.33;
  bool bootstrap = true;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  int left = -1;     // bit clear
  int right = -1;    // bit set
  double value = 0.0;
  std::size_t count = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  double predict(const BitVector& x) const;
  std::size_t leaves() const;
};

struct ForestModel {
  ForestParams params;
  std::uint64_t seed = 0;
  std::size_t nbits = 0;
  std::vector<Tree> trees;
  bool degenerate = false;  // constant training target
  double oob_mse = 0.0;     // NaN when no row was ever out of bag
};

ForestModel forest_fit(std::span<const BitVector> x, std::span<const double> y, const ForestParams& params,
                       std::uint64_t seed);
double forest_predict(const ForestModel& m, const BitVector& x);

// --- ridge regression -------------------------------------------------------

struct RidgeModel {
  std::vector<double> weights;
  double bias = 0.0;
  double lambda = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;  // relative residual of the normal equations
};

// Minimizes |Xw + b - y|^2 + lambda |w|^2 (bias unpenalized) by conjugate
// gradients on the centered normal equations.
RidgeModel ridge_fit(std::span<const BitVector> x, std::span<const double> y, double lambda, double tol = 1e-8);
double ridge_predict(const RidgeModel& m, const BitVector& x);

// --- MLP on fingerprints ----------------------------------------------------

struct MlpParams {
  std::size_t hidden = 256;
  double dropout = 0.1;
};

class MlpModel : public train::Trainable {
 public:
  MlpModel(std::size_t nbits, const MlpParams& params, std::uint64_t seed);

  // Rows passed to forward() index this list.
  void set_inputs(std::span<const BitVector> inputs) { inputs_ = inputs; }

  std::vector<tensor::Tensor> parameters() override { return {w1_, b1_, w2_, b2_}; }
  tensor::NamedTensors state() override;
  tensor::Tensor forward(tensor::Tape& t, std::span<const std::size_t> rows, std::uint64_t dropout_seed) override;

  tensor::Tensor& output_bias() { return b2_; }

 private:
  std::size_t nbits_;
  MlpParams params_;
  std::span<const BitVector> inputs_;
  tensor::Tensor w1_, b1_, w2_, b2_;
};

// compound_id,model,task,prediction
void write_predictions_csv(std::ostream& out, std::span<const std::string> ids, const std::string& model,
                           const std::string& task, std::span<const double> predictions);

}  // namespace cb2::baselines
