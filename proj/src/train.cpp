#include "cb2/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "cb2/dataio.hpp"
#include "cb2/util/csv.hpp"
#include "cb2/util/hash.hpp"
#include "cb2/util/rng.hpp"

namespace cb2::train {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw TrainError("lr must be non-negative");
  if (batch_size == 0) throw TrainError("batch_size must be positive");
  if (max_epochs < 0) throw TrainError("max_epochs must be non-negative");
  if (patience < 1) throw TrainError("patience must be at least 1");
}

Tensor CB2formerTrainable::forward(Tape& t, std::span<const std::size_t> rows, std::uint64_t dropout_seed) {
  std::vector<const model::MoleculeInput*> batch;
  batch.reserve(rows.size());
  for (std::size_t r : rows) batch.push_back(&inputs_[r]);
  return model_.forward(t, batch, task_, dropout_seed);
}

void init_output_bias(model::CB2former& m, Task task, double value) {
  m.param(task == Task::Regression ? "reg.b" : "clf.b").values()[0] = value;
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    if (!p.has_grad()) continue;
    const auto& g = p.grad_values();
    auto& m = m_[k];
    auto& v = v_[k];
    double* w = p.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad_values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.grad()) g *= s;
    }
  }
  return norm;
}

namespace {

Tensor batch_loss(Tape& t, const Tensor& out, std::span<const double> targets, std::span<const std::size_t> rows,
                  Task task) {
  Tensor y(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) y.values()[i] = targets[rows[i]];
  return task == Task::Regression ? tensor::mse_loss(t, out, y) : tensor::bce_with_logits_loss(t, out, y);
}

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> s;
  s.reserve(params.size());
  for (const auto& p : params) s.push_back(p.values());
  return s;
}

}  // namespace

double loss_value(Trainable& m, std::span<const double> targets, std::span<const std::size_t> rows, Task task,
                  std::size_t batch_size) {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s < rows.size(); s += batch_size) {
    const auto part = rows.subspan(s, std::min(batch_size, rows.size() - s));
    Tape tape(tensor::Mode::Eval, false);
    const Tensor out = m.forward(tape, part, 0);
    total += batch_loss(tape, out, targets, part, task).item() * static_cast<double>(part.size());
  }
  return total / static_cast<double>(rows.size());
}

std::vector<double> predict_raw(Trainable& m, std::span<const std::size_t> rows, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t s = 0; s < rows.size(); s += batch_size) {
    const auto part = rows.subspan(s, std::min(batch_size, rows.size() - s));
    Tape tape(tensor::Mode::Eval, false);
    const Tensor y = m.forward(tape, part, 0);
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return out;
}

RunLog fit(Trainable& m, std::span<const double> targets, std::span<const std::size_t> train_rows,
           std::span<const std::size_t> val_rows, const TrainConfig& config) {
  config.validate();
  if (train_rows.empty()) throw TrainError("empty training split");
  const auto start = std::chrono::steady_clock::now();
  // Without a validation split, selection falls back to the training loss.
  const auto select_rows = val_rows.empty() ? train_rows : val_rows;

  std::vector<Tensor> params = m.parameters();
  Adam adam(params, config.lr, config.beta1, config.beta2, config.adam_eps);

  RunLog log;
  log.initial_val_loss = loss_value(m, targets, select_rows, config.task, config.batch_size);
  log.best_val_loss = log.initial_val_loss;
  auto best = snapshot(params);
  bool have_best = false;
  int since_best = 0;

  std::vector<std::size_t> order(train_rows.begin(), train_rows.end());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(config.seed, static_cast<std::uint64_t>(epoch));
    std::copy(train_rows.begin(), train_rows.end(), order.begin());
    Rng(epoch_seed).shuffle(order);

    double train_total = 0.0;
    std::uint64_t batch_index = 0;
    for (std::size_t s = 0; s < order.size(); s += config.batch_size) {
      const std::span<const std::size_t> part(order.data() + s, std::min(config.batch_size, order.size() - s));
      Tape tape(tensor::Mode::Train);
      const Tensor out = m.forward(tape, part, mix_seed(epoch_seed, ++batch_index));
      Tensor loss = batch_loss(tape, out, targets, part, config.task);
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        throw TrainError("DivergedLoss: non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch_index));
      }
      tape.backward(loss);
      clip_grad_norm(params, config.clip_norm);
      adam.step();
      adam.zero_grad();
      train_total += lv * static_cast<double>(part.size());
    }

    EpochLog e;
    e.epoch = epoch;
    e.train_loss = train_total / static_cast<double>(order.size());
    e.val_loss = loss_value(m, targets, select_rows, config.task, config.batch_size);
    if (!std::isfinite(e.val_loss)) throw TrainError("DivergedLoss: non-finite validation loss at epoch " + std::to_string(epoch));
    log.epochs.push_back(e);

    if (!have_best || e.val_loss < log.best_val_loss) {
      have_best = true;
      log.best_val_loss = e.val_loss;
      log.best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      log.stopped_early = true;
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k].values() = best[k];
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

void write_runlog_csv(std::ostream& out, const RunLog& log) {
  out << "epoch,train_loss,val_loss\n";
  csv::write_row(out, {"0", "", csv::format_double(log.initial_val_loss)});
  for (const auto& e : log.epochs) {
    csv::write_row(out, {std::to_string(e.epoch), csv::format_double(e.train_loss), csv::format_double(e.val_loss)});
  }
}

metrics::MetricsReport score(Trainable& m, Task task, std::span<const double> pic50, std::span<const int> active,
                             std::span<const std::size_t> rows, double active_threshold, std::size_t batch_size) {
  const auto raw = predict_raw(m, rows, batch_size);
  std::vector<double> y, yhat, sc;
  std::vector<int> lab;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    lab.push_back(active[rows[i]]);
    if (task == Task::Regression) {
      y.push_back(pic50[rows[i]]);
      yhat.push_back(raw[i]);
      sc.push_back(raw[i]);
    } else {
      const double p = sigmoid(raw[i]);
      y.push_back(active[rows[i]] ? 1.0 : 0.0);
      yhat.push_back(p);
      sc.push_back(p);
    }
  }
  // A regression score crosses the activity threshold exactly when the
  // predicted compound would be labeled active.
  const double threshold = task == Task::Regression ? active_threshold : 0.5;
  auto r = metrics::evaluate(y, yhat, lab, sc, threshold);
  r.task = model::to_string(task);
  return r;
}

metrics::MetricsReport aggregate_folds(std::span<const metrics::MetricsReport> folds, bool want_std) {
  metrics::MetricsReport r;
  auto stat = [&](auto get) -> std::optional<double> {
    std::vector<double> v;
    for (const auto& f : folds) {
      if (auto x = get(f)) v.push_back(*x);
    }
    if (v.empty()) return std::nullopt;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (!want_std) return mean;
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  using R = metrics::MetricsReport;
  r.r2 = *stat([](const R& f) { return std::optional<double>(f.r2); });
  r.rmse = *stat([](const R& f) { return std::optional<double>(f.rmse); });
  r.auc = stat([](const R& f) { return f.auc; });
  r.accuracy = stat([](const R& f) { return f.accuracy; });
  for (const auto& f : folds) {
    r.n += f.n;
    r.ss_res += f.ss_res;
    r.ss_tot += f.ss_tot;
  }
  if (!folds.empty()) {
    r.model = folds.front().model;
    r.task = folds.front().task;
  }
  r.fold = want_std ? "std" : "mean";
  return r;
}

CvResult cross_validate(const TrainableFactory& factory, const Dataset& data, std::size_t k,
                        const TrainConfig& config, const std::string& model_name) {
  const std::size_t n = data.pic50.size();
  const auto folds = data::kfold(n, k, config.seed);
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    targets[i] = config.task == Task::Regression ? data.pic50[i] : (data.active[i] ? 1.0 : 0.0);
  }
  CvResult cv;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    TrainConfig fc = config;
    fc.seed = mix_seed(config.seed, 1000 + f);
    std::vector<std::size_t> inner = folds[f].train;
    Rng(fc.seed).shuffle(inner);
    const std::size_t n_stop = std::max<std::size_t>(1, inner.size() / 10);
    std::vector<std::size_t> stop_rows(inner.end() - static_cast<std::ptrdiff_t>(n_stop), inner.end());
    inner.resize(inner.size() - n_stop);

    auto m = factory();
    auto log = fit(*m, targets, inner, stop_rows, fc);
    auto report = score(*m, config.task, data.pic50, data.active, folds[f].val, data.active_threshold);
    report.model = model_name;
    report.fold = std::to_string(f);
    log.final = report;
    cv.folds.push_back(report);
    cv.logs.push_back(std::move(log));
  }
  cv.mean = aggregate_folds(cv.folds, false);
  cv.stddev = aggregate_folds(cv.folds, true);
  return cv;
}

void write_cv_csv(std::ostream& out, const CvResult& cv) {
  out << "fold,n,r2,rmse,auc,accuracy,r2_std,rmse_std,auc_std,accuracy_std\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  for (const auto& f : cv.folds) {
    csv::write_row(out, {f.fold, std::to_string(f.n), csv::format_double(f.r2), csv::format_double(f.rmse), opt(f.auc),
                         opt(f.accuracy), "", "", "", ""});
  }
  const auto& m = cv.mean;
  const auto& s = cv.stddev;
  csv::write_row(out, {"mean", std::to_string(m.n), csv::format_double(m.r2), csv::format_double(m.rmse), opt(m.auc),
                       opt(m.accuracy), csv::format_double(s.r2), csv::format_double(s.rmse), opt(s.auc),
                       opt(s.accuracy)});
}

std::vector<GridCell> expand_grid(const Grid& grid) {
  std::vector<GridCell> cells{GridCell{}};
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw TrainError("grid key '" + key + "' has no values");
    std::vector<GridCell> next;
    for (const auto& c : cells) {
      for (const auto& v : values) {
        GridCell d = c;
        d[key] = v;
        next.push_back(std::move(d));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

std::string cell_string(const GridCell& cell) {
  std::string s;
  for (const auto& [k, v] : cell) {
    if (!s.empty()) s += ';';
    s += k + "=" + v;
  }
  return s;
}

std::vector<LeaderboardRow> grid_search(const Grid& grid,
                                        const std::function<std::unique_ptr<Trainable>(const GridCell&)>& factory,
                                        std::span<const double> targets, std::span<const std::size_t> train_rows,
                                        std::span<const std::size_t> val_rows, const TrainConfig& config) {
  if (grid.empty()) throw TrainError("empty grid");
  std::vector<LeaderboardRow> rows;
  for (const auto& cell : expand_grid(grid)) {
    model::ModelConfig unused;
    TrainConfig tc = config;
    apply_overrides(cell, unused, tc);
    auto m = factory(cell);
    const auto log = fit(*m, targets, train_rows, val_rows, tc);
    LeaderboardRow row;
    row.cell = cell;
    row.val_loss = log.best_val_loss;
    row.best_epoch = log.best_epoch;
    for (const auto& p : m->parameters()) row.parameter_count += p.numel();
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.val_loss != b.val_loss) return a.val_loss < b.val_loss;
    if (a.parameter_count != b.parameter_count) return a.parameter_count < b.parameter_count;
    return cell_string(a.cell) < cell_string(b.cell);
  });
  return rows;
}

void write_leaderboard_csv(std::ostream& out, const std::vector<LeaderboardRow>& rows) {
  out << "rank,config,val_loss,parameter_count,best_epoch\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv::write_row(out, {std::to_string(i + 1), cell_string(rows[i].cell), csv::format_double(rows[i].val_loss),
                         std::to_string(rows[i].parameter_count), std::to_string(rows[i].best_epoch)});
  }
}

void apply_overrides(const GridCell& cell, model::ModelConfig& mc, TrainConfig& tc) {
  for (const auto& [key, val] : cell) {
    try {
      if (key == "d_model") mc.d_model = std::stoi(val);
      else if (key == "n_heads" || key == "heads") mc.n_heads = std::stoi(val);
      else if (key == "n_layers" || key == "layers") mc.n_layers = std::stoi(val);
      else if (key == "d_ff") mc.d_ff = std::stoi(val);
      else if (key == "dropout") mc.dropout = std::stod(val);
      else if (key == "n_prompts" || key == "prompts") mc.n_prompts = std::stoi(val);
      else if (key == "gcn_layers") mc.gcn_layers = std::stoi(val);
      else if (key == "lr") tc.lr = std::stod(val);
      else if (key == "batch_size") tc.batch_size = std::stoul(val);
      else if (key == "max_epochs" || key == "epochs") tc.max_epochs = std::stoi(val);
      else if (key == "patience") tc.patience = std::stoi(val);
      else throw TrainError("unknown hyperparameter '" + key + "'");
    } catch (const std::logic_error&) {
      throw TrainError("bad value for '" + key + "': '" + val + "'");
    }
  }
}

}  // namespace cb2::train
