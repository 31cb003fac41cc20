#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cb2/metrics.hpp"
#include "cb2/model/cb2former.hpp"
#include "cb2/tensor/checkpoint.hpp"

namespace cb2::train {

using model::Task;
using tensor::Tape;
using tensor::Tensor;

class TrainError : public Error {
 public:
  explicit TrainError(const std::string& what) : Error(ErrorCategory::Model, what) {}
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  int max_epochs = 200;
  int patience = 20;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables
  std::uint64_t seed = 0;
  Task task = Task::Regression;

  void validate() const;
};

// Anything fit() can optimize: rows are indices into the caller's dataset.
class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual std::vector<Tensor> parameters() = 0;
  virtual tensor::NamedTensors state() = 0;
  // Raw outputs [rows, 1] (values for regression, logits for classification).
  virtual Tensor forward(Tape& t, std::span<const std::size_t> rows, std::uint64_t dropout_seed) = 0;
};

class CB2formerTrainable : public Trainable {
 public:
  CB2formerTrainable(model::CB2former& model, std::span<const model::MoleculeInput> inputs, Task task)
      : model_(model), inputs_(inputs), task_(task) {}

  std::vector<Tensor> parameters() override { return model_.parameters(); }
  tensor::NamedTensors state() override { return model_.state(); }
  Tensor forward(Tape& t, std::span<const std::size_t> rows, std::uint64_t dropout_seed) override;

 private:
  model::CB2former& model_;
  std::span<const model::MoleculeInput> inputs_;
  Task task_;
};

// Sets the active head's bias to `value` (mean target or its logit).
void init_output_bias(model::CB2former& m, Task task, double value);

class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  // Applies one update from the current gradients (missing gradients count as zero).
  void step();
  void zero_grad();
  int steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Scales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct RunLog {
  double initial_val_loss = 0.0;
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  double wall_seconds = 0.0;
  metrics::MetricsReport final;
};

double loss_value(Trainable& m, std::span<const double> targets, std::span<const std::size_t> rows, Task task,
                  std::size_t batch_size);
std::vector<double> predict_raw(Trainable& m, std::span<const std::size_t> rows, std::size_t batch_size);

// Adam with early stopping on validation loss; the best epoch's weights are
// restored before returning. `targets` are pActivity (regression) or 0/1.
RunLog fit(Trainable& m, std::span<const double> targets, std::span<const std::size_t> train_rows,
           std::span<const std::size_t> val_rows, const TrainConfig& config);

// epoch,train_loss,val_loss (epoch 0 = before training, val loss only)
void write_runlog_csv(std::ostream& out, const RunLog& log);

// Metrics for `rows`: regression compares predictions to pActivity and ranks
// them for auc; classification uses probabilities against the labels.
metrics::MetricsReport score(Trainable& m, Task task, std::span<const double> pic50, std::span<const int> active,
                             std::span<const std::size_t> rows, double active_threshold, std::size_t batch_size = 64);

struct Dataset {
  std::span<const double> pic50;
  std::span<const int> active;
  double active_threshold = 6.0;
};

// Builds a fresh model for a job; the returned object must stay valid for
// the job's lifetime (it owns whatever it wraps).
using TrainableFactory = std::function<std::unique_ptr<Trainable>()>;

struct CvResult {
  std::vector<metrics::MetricsReport> folds;
  metrics::MetricsReport mean;
  metrics::MetricsReport stddev;  // sample standard deviation
  std::vector<RunLog> logs;
};

// k independent fits on kfold(seed) splits. Each fold's training part gives
// up a seeded 10% slice for early stopping; metrics use the held-out fold.
CvResult cross_validate(const TrainableFactory& factory, const Dataset& data, std::size_t k,
                        const TrainConfig& config, const std::string& model_name);

// Mean (or sample standard deviation) of each metric over folds; optional
// metrics use only the folds that have them.
metrics::MetricsReport aggregate_folds(std::span<const metrics::MetricsReport> folds, bool want_std);

// fold,n,r2,rmse,auc,accuracy,r2_std,rmse_std,auc_std,accuracy_std -- one
// row per fold plus a final "mean" row carrying the standard deviations.
void write_cv_csv(std::ostream& out, const CvResult& cv);

using GridCell = std::map<std::string, std::string>;
using Grid = std::map<std::string, std::vector<std::string>>;

std::vector<GridCell> expand_grid(const Grid& grid);
std::string cell_string(const GridCell& cell);  // "k1=v1;k2=v2" in key order

struct LeaderboardRow {
  GridCell cell;
  double val_loss = 0.0;
  std::size_t parameter_count = 0;
  int best_epoch = 0;
};

// Fits one model per grid cell; rows sorted by validation loss, then
// parameter count, then cell string.
std::vector<LeaderboardRow> grid_search(const Grid& grid,
                                        const std::function<std::unique_ptr<Trainable>(const GridCell&)>& factory,
                                        std::span<const double> targets, std::span<const std::size_t> train_rows,
                                        std::span<const std::size_t> val_rows, const TrainConfig& config);

void write_leaderboard_csv(std::ostream& out, const std::vector<LeaderboardRow>& rows);

// Applies grid/CLI overrides such as d_model, n_heads, lr or batch_size.
void apply_overrides(const GridCell& cell, model::ModelConfig& mc, TrainConfig& tc);

}  // namespace cb2::train
