#include "cb2/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cb2/baselines.hpp"
#include "cb2/chem/canon.hpp"
#include "cb2/dataio.hpp"
#include "cb2/explain.hpp"
#include "cb2/fingerprint.hpp"
#include "cb2/kernels.hpp"
#include "cb2/metrics.hpp"
#include "cb2/model/cb2former.hpp"
#include "cb2/synthetic.hpp"
#include "cb2/train.hpp"
#include "cb2/util/csv.hpp"

#ifndef CB2_VERSION
#define CB2_VERSION "dev"
#endif

namespace cb2::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string command;
  std::vector<std::string> positional;
  std::string out;
  std::uint64_t seed = 0;
  std::string task = "reg";
  double active_threshold = data::kDefaultActiveThreshold;
  double max_ratio = data::kDefaultDuplicateRatio;
  std::string prompts_file;
  int d_model = 128;
  int heads = 4;
  int layers = 2;
  int d_ff = 256;
  double dropout = 0.1;
  int n_prompts = 8;
  int gcn_layers = 2;
  int epochs = 200;
  int patience = 20;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t k = 5;
  std::size_t knn_k = 5;
  std::string fp = "morgan";
  std::size_t nbits = fp::kDefaultBits;
  std::string model = "cb2former";
  std::string models = "cb2former,knn,rf,ridge,mlp";
  std::string grid;
  std::size_t n = 2000;
  std::size_t trees = 100;
};

std::map<std::string, std::string> resolved(const Options& o) {
  auto num = [](double v) { return csv::format_double(v); };
  std::map<std::string, std::string> m{
      {"tool", "cb2former"},
      {"version", CB2_VERSION},
      {"subcommand", o.command},
      {"seed", std::to_string(o.seed)},
      {"task", o.task},
      {"active_threshold", num(o.active_threshold)},
      {"max_ratio", num(o.max_ratio)},
      {"prompts_file", o.prompts_file},
      {"d_model", std::to_string(o.d_model)},
      {"heads", std::to_string(o.heads)},
      {"layers", std::to_string(o.layers)},
      {"d_ff", std::to_string(o.d_ff)},
      {"dropout", num(o.dropout)},
      {"n_prompts", std::to_string(o.n_prompts)},
      {"gcn_layers", std::to_string(o.gcn_layers)},
      {"epochs", std::to_string(o.epochs)},
      {"patience", std::to_string(o.patience)},
      {"batch_size", std::to_string(o.batch_size)},
      {"lr", num(o.lr)},
      {"k", std::to_string(o.k)},
      {"knn_k", std::to_string(o.knn_k)},
      {"fp", o.fp},
      {"nbits", std::to_string(o.nbits)},
      {"model", o.model},
      {"models", o.models},
      {"grid", o.grid},
      {"n", std::to_string(o.n)},
      {"trees", std::to_string(o.trees)},
      {"out", o.out},
  };
  for (std::size_t i = 0; i < o.positional.size(); ++i) m["input" + std::to_string(i)] = o.positional[i];
  return m;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCategory::Data, "cannot write " + p.string());
  return f;
}

fs::path out_dir(const Options& o) {
  if (o.out.empty()) throw Error(ErrorCategory::Usage, o.command + " requires --out <dir>");
  fs::create_directories(o.out);
  return o.out;
}

void write_manifest(const Options& o) {
  auto f = open_out(fs::path(o.out) / "run-manifest");
  for (const auto& [k, v] : resolved(o)) f << k << '=' << v << '\n';
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::string& input(const Options& o, std::size_t i, const char* what) {
  if (o.positional.size() <= i) throw Error(ErrorCategory::Usage, o.command + " needs " + what);
  return o.positional[i];
}

// --- shared loading ---------------------------------------------------------

struct Loaded {
  std::vector<data::ActivityRecord> records;
  std::vector<chem::MolGraph> graphs;
  std::vector<double> pic50;
  std::vector<int> active;
};

Loaded load_dataset(const Options& o, const std::string& path) {
  auto raw = data::load_csv(path, o.active_threshold);
  data::CleanOptions co;
  co.active_threshold = o.active_threshold;
  co.max_ratio = o.max_ratio;
  Loaded d;
  d.records = data::clean(raw.records, co).kept;
  for (const auto& r : d.records) {
    d.graphs.push_back(chem::parse_smiles(r.smiles));
    d.pic50.push_back(r.pic50);
    d.active.push_back(r.active ? 1 : 0);
  }
  if (d.records.empty()) throw data::DataError(data::DataErrorKind::TooFewRecords, "TooFewRecords: no usable records in " + path);
  return d;
}

model::ModelConfig model_config(const Options& o) {
  model::ModelConfig c;
  c.d_model = o.d_model;
  c.n_heads = o.heads;
  c.n_layers = o.layers;
  c.d_ff = o.d_ff;
  c.dropout = o.dropout;
  c.n_prompts = o.n_prompts;
  c.gcn_layers = o.gcn_layers;
  c.prompt_seed = o.seed;
  if (!o.prompts_file.empty()) {
    std::ifstream in(o.prompts_file);
    if (!in) throw Error(ErrorCategory::Data, "cannot open " + o.prompts_file);
    c.prompt_motifs.clear();
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty() && line[0] != '#') c.prompt_motifs.push_back(line);
    }
  }
  c.validate();
  return c;
}

train::TrainConfig train_config(const Options& o) {
  train::TrainConfig t;
  t.lr = o.lr;
  t.batch_size = o.batch_size;
  t.max_epochs = o.epochs;
  t.patience = o.patience;
  t.seed = o.seed;
  t.task = model::task_from_string(o.task);
  t.validate();
  return t;
}

std::vector<double> targets_for(const Loaded& d, model::Task task) {
  std::vector<double> y(d.records.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = task == model::Task::Regression ? d.pic50[i] : d.active[i];
  return y;
}

double initial_bias(std::span<const double> y, std::span<const std::size_t> rows, model::Task task) {
  double s = 0.0;
  for (std::size_t r : rows) s += y[r];
  const double mean = rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
  if (task == model::Task::Regression) return mean;
  const double p = std::clamp(mean, 1e-3, 1.0 - 1e-3);
  return std::log(p / (1.0 - p));
}

std::vector<model::MoleculeInput> prepare_all(const std::vector<chem::MolGraph>& graphs, const model::Vocab& v) {
  std::vector<model::MoleculeInput> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(model::prepare(g, v));
  return out;
}

// Vocabulary from the training molecules only.
model::Vocab train_vocab(const Loaded& d, std::span<const std::size_t> rows) {
  std::vector<chem::MolGraph> sub;
  for (std::size_t r : rows) sub.push_back(d.graphs[r]);
  return model::Vocab::build(sub);
}

// --- model directory --------------------------------------------------------

void save_model_dir(const fs::path& dir, const model::CB2former& m, model::Task task) {
  tensor::save_checkpoint(dir / "model.ckpt", m.state());
  auto f = open_out(dir / "model.cfg");
  f << m.config().serialize() << "task=" << model::to_string(task) << '\n' << "vocab=" << m.vocab().serialize() << '\n';
}

struct LoadedModel {
  std::unique_ptr<model::CB2former> model;
  model::Task task = model::Task::Regression;
};

LoadedModel load_model_dir(const fs::path& dir) {
  std::ifstream f(dir / "model.cfg");
  if (!f) throw Error(ErrorCategory::Data, "cannot open " + (dir / "model.cfg").string());
  std::string line, cfg_text, vocab_text, task = "reg";
  while (std::getline(f, line)) {
    if (line.rfind("task=", 0) == 0) task = line.substr(5);
    else if (line.rfind("vocab=", 0) == 0) vocab_text = line.substr(6);
    else cfg_text += line + "\n";
  }
  LoadedModel lm;
  lm.task = model::task_from_string(task);
  lm.model = std::make_unique<model::CB2former>(model::ModelConfig::parse(cfg_text), model::Vocab::parse(vocab_text), 0);
  lm.model->load_state(tensor::load_checkpoint(dir / "model.ckpt"));
  return lm;
}

std::vector<fp::FpKind> parse_fp_list(const std::string& s) {
  std::vector<fp::FpKind> kinds;
  for (const auto& name : split_list(s, ',')) {
    try {
      kinds.push_back(fp::fp_kind_from_string(name));
    } catch (const fp::FingerprintError& e) {
      throw Error(ErrorCategory::Usage, std::string("--fp: ") + e.what());
    }
  }
  if (kinds.empty()) throw Error(ErrorCategory::Usage, "--fp needs at least one fingerprint kind");
  return kinds;
}

// Single fingerprint, or the concatenation of several.
std::vector<fp::BitVector> fingerprints(const std::vector<chem::MolGraph>& graphs, const std::vector<fp::FpKind>& kinds,
                                        std::size_t nbits) {
  std::vector<std::vector<fp::Fingerprint>> per_kind;
  for (auto k : kinds) per_kind.push_back(fp::compute_many(k, graphs, nbits));
  std::vector<fp::BitVector> out;
  out.reserve(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (kinds.size() == 1) {
      out.push_back(per_kind[0][i].bits);
    } else {
      std::vector<fp::Fingerprint> parts;
      for (const auto& pk : per_kind) parts.push_back(pk[i]);
      out.push_back(fp::concat_fp(parts).bits);
    }
  }
  return out;
}

// --- subcommands ------------------------------------------------------------

int run_synth(const Options& o) {
  const auto dir = out_dir(o);
  synth::SyntheticOptions so;
  so.n = o.n;
  so.seed = o.seed;
  const auto recs = synth::generate(so);
  auto f = open_out(dir / "synthetic.csv");
  f << "compound_id,smiles,measure_type,value,units\n";
  for (const auto& r : recs) {
    csv::write_row(f, {r.compound_id, r.smiles, data::to_string(r.measure_type), csv::format_double(r.value),
                       data::to_string(r.units)});
  }
  write_manifest(o);
  std::cout << "wrote " << recs.size() << " molecules to " << (dir / "synthetic.csv").string() << '\n';
  return 0;
}

int run_ingest(const Options& o) {
  const auto dir = out_dir(o);
  auto raw = data::load_csv(input(o, 0, "an input CSV"), o.active_threshold);
  data::CleanOptions co;
  co.active_threshold = o.active_threshold;
  co.max_ratio = o.max_ratio;
  const auto cleaned = data::clean(raw.records, co);
  {
    auto f = open_out(dir / "dataset.csv");
    data::write_dataset(f, cleaned.kept);
  }
  {
    auto f = open_out(dir / "rejects.csv");
    data::write_rejects(f, raw.rejects);
  }
  {
    auto f = open_out(dir / "clean-report.csv");
    f << "key,value\n";
    f << "rows_read," << raw.records.size() + raw.rejects.size() << '\n';
    f << "rows_rejected," << raw.rejects.size() << '\n';
    f << "kept," << cleaned.report.kept << '\n';
    f << "merged_duplicates," << cleaned.report.merged << '\n';
    for (const auto& [reason, count] : cleaned.report.dropped) f << "dropped:" << reason << ',' << count << '\n';
  }
  write_manifest(o);
  std::cout << "kept " << cleaned.report.kept << " of " << raw.records.size() + raw.rejects.size() << " rows\n";
  return 0;
}

int run_featurize(const Options& o) {
  const auto dir = out_dir(o);
  const auto kinds = parse_fp_list(o.fp);
  auto raw = data::load_csv(input(o, 0, "an input CSV"), o.active_threshold);
  auto f = open_out(dir / "features.csv");
  std::vector<std::string> header{"compound_id", "canonical_smiles", "pic50", "active"};
  for (auto k : kinds) header.emplace_back(fp::to_string(k));
  csv::write_row(f, header);
  std::vector<data::Reject> rejects = raw.rejects;
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    const auto& r = raw.records[i];
    chem::MolGraph g;
    try {
      g = chem::parse_smiles(r.smiles);
    } catch (const chem::ParseError& e) {
      rejects.push_back({r.row, r.compound_id + ": " + e.what()});
      continue;
    }
    std::vector<std::string> row{r.compound_id, chem::canonicalize(g), csv::format_double(r.pic50), r.active ? "1" : "0"};
    for (auto k : kinds) row.push_back(fp::compute(k, g, o.nbits).bits.to_hex());
    csv::write_row(f, row);
  }
  {
    auto rf = open_out(dir / "rejects.csv");
    data::write_rejects(rf, rejects);
  }
  write_manifest(o);
  return 0;
}

int run_train(const Options& o) {
  const auto dir = out_dir(o);
  const auto d = load_dataset(o, input(o, 0, "a dataset CSV"));
  auto mc = model_config(o);
  auto tc = train_config(o);
  const auto split = data::split(d.records.size(), {0.8, 0.1, 0.1}, o.seed);
  const auto y = targets_for(d, tc.task);
  const auto vocab = train_vocab(d, split.train);
  const auto inputs = prepare_all(d.graphs, vocab);

  if (!o.grid.empty()) {
    train::Grid grid;
    for (const auto& part : split_list(o.grid, ';')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw Error(ErrorCategory::Usage, "bad --grid entry '" + part + "'");
      grid[part.substr(0, eq)] = split_list(part.substr(eq + 1), ',');
    }
    std::vector<std::unique_ptr<model::CB2former>> keep;
    auto factory = [&](const train::GridCell& cell) -> std::unique_ptr<train::Trainable> {
      auto cmc = mc;
      auto ctc = tc;
      train::apply_overrides(cell, cmc, ctc);
      keep.push_back(std::make_unique<model::CB2former>(cmc, vocab, o.seed));
      train::init_output_bias(*keep.back(), tc.task, initial_bias(y, split.train, tc.task));
      return std::make_unique<train::CB2formerTrainable>(*keep.back(), inputs, tc.task);
    };
    const auto board = train::grid_search(grid, factory, y, split.train, split.val, tc);
    auto f = open_out(dir / "leaderboard.csv");
    train::write_leaderboard_csv(f, board);
    train::apply_overrides(board.front().cell, mc, tc);
  }

  model::CB2former m(mc, vocab, o.seed);
  train::init_output_bias(m, tc.task, initial_bias(y, split.train, tc.task));
  train::CB2formerTrainable tm(m, inputs, tc.task);
  auto log = train::fit(tm, y, split.train, split.val, tc);
  auto report = train::score(tm, tc.task, d.pic50, d.active, split.test, o.active_threshold);
  report.model = "cb2former";
  report.fold = "test";
  save_model_dir(dir, m, tc.task);
  {
    auto f = open_out(dir / "runlog.csv");
    train::write_runlog_csv(f, log);
  }
  {
    auto f = open_out(dir / "metrics.jsonl");
    metrics::write_jsonl(f, report);
  }
  write_manifest(o);
  std::cout << "best epoch " << log.best_epoch << ", test " << metrics::to_json(report) << '\n';
  return 0;
}

// Fits and scores a fingerprint baseline on (train, test) rows.
std::vector<double> fit_predict_baseline(const std::string& name, const std::vector<fp::BitVector>& x,
                                         std::span<const double> y, std::span<const std::size_t> train_rows,
                                         std::span<const std::size_t> val_rows, std::span<const std::size_t> test_rows,
                                         const Options& o, model::Task task) {
  std::vector<fp::BitVector> xt;
  std::vector<double> yt;
  for (std::size_t r : train_rows) {
    xt.push_back(x[r]);
    yt.push_back(y[r]);
  }
  std::vector<double> pred;
  if (name == "knn") {
    const auto m = baselines::knn_fit(xt, yt, std::min(o.knn_k, xt.size()));
    for (std::size_t r : test_rows) pred.push_back(baselines::knn_predict(m, x[r]));
  } else if (name == "rf") {
    baselines::ForestParams fp;
    fp.n_trees = o.trees;
    const auto m = baselines::forest_fit(xt, yt, fp, o.seed);
    for (std::size_t r : test_rows) pred.push_back(baselines::forest_predict(m, x[r]));
  } else if (name == "ridge") {
    const auto m = baselines::ridge_fit(xt, yt, 1.0);
    for (std::size_t r : test_rows) pred.push_back(baselines::ridge_predict(m, x[r]));
  } else if (name == "mlp") {
    baselines::MlpModel m(x.front().size(), {}, o.seed);
    m.set_inputs(x);
    m.output_bias().values()[0] = initial_bias(y, train_rows, task);
    auto tc = train_config(o);
    train::fit(m, y, train_rows, val_rows, tc);
    pred = train::predict_raw(m, test_rows, 64);
    if (task == model::Task::Classification) {
      for (double& p : pred) p = 1.0 / (1.0 + std::exp(-p));
    }
  } else {
    throw Error(ErrorCategory::Usage, "unknown model '" + name + "'");
  }
  return pred;
}

metrics::MetricsReport score_predictions(const Loaded& d, std::span<const std::size_t> rows,
                                         std::span<const double> pred, model::Task task, double threshold) {
  std::vector<double> y, sc;
  std::vector<int> lab;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    lab.push_back(d.active[rows[i]]);
    y.push_back(task == model::Task::Regression ? d.pic50[rows[i]] : d.active[rows[i]]);
    sc.push_back(pred[i]);
  }
  auto r = metrics::evaluate(y, pred, lab, sc, task == model::Task::Regression ? threshold : 0.5);
  r.task = model::to_string(task);
  return r;
}

int run_cv(const Options& o) {
  const auto dir = out_dir(o);
  const auto d = load_dataset(o, input(o, 0, "a dataset CSV"));
  auto tc = train_config(o);
  const auto y = targets_for(d, tc.task);
  train::Dataset ds{d.pic50, d.active, o.active_threshold};
  train::CvResult cv;

  if (o.model == "cb2former") {
    const auto mc = model_config(o);
    // One vocabulary from all molecules: token ids carry no label information.
    const auto vocab = model::Vocab::build(d.graphs);
    const auto inputs = prepare_all(d.graphs, vocab);
    struct Owned : train::Trainable {
      std::unique_ptr<model::CB2former> m;
      std::unique_ptr<train::CB2formerTrainable> t;
      std::vector<tensor::Tensor> parameters() override { return t->parameters(); }
      tensor::NamedTensors state() override { return t->state(); }
      tensor::Tensor forward(tensor::Tape& tp, std::span<const std::size_t> rows, std::uint64_t s) override {
        return t->forward(tp, rows, s);
      }
    };
    std::vector<std::size_t> all(y.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const double b0 = initial_bias(y, all, tc.task);
    cv = train::cross_validate(
        [&]() -> std::unique_ptr<train::Trainable> {
          auto w = std::make_unique<Owned>();
          w->m = std::make_unique<model::CB2former>(mc, vocab, o.seed);
          train::init_output_bias(*w->m, tc.task, b0);
          w->t = std::make_unique<train::CB2formerTrainable>(*w->m, inputs, tc.task);
          return w;
        },
        ds, o.k, tc, "cb2former");
  } else {
    const auto x = fingerprints(d.graphs, parse_fp_list(o.fp), o.nbits);
    const auto folds = data::kfold(d.records.size(), o.k, o.seed);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto pred = fit_predict_baseline(o.model, x, y, folds[f].train, {}, folds[f].val, o, tc.task);
      auto r = score_predictions(d, folds[f].val, pred, tc.task, o.active_threshold);
      r.model = o.model;
      r.fold = std::to_string(f);
      cv.folds.push_back(r);
    }
    cv.mean = train::aggregate_folds(cv.folds, false);
    cv.stddev = train::aggregate_folds(cv.folds, true);
  }
  {
    auto f = open_out(dir / "cv.csv");
    train::write_cv_csv(f, cv);
  }
  {
    auto f = open_out(dir / "cv_metrics.jsonl");
    for (const auto& r : cv.folds) metrics::write_jsonl(f, r);
    metrics::write_jsonl(f, cv.mean);
    metrics::write_jsonl(f, cv.stddev);
  }
  write_manifest(o);
  std::cout << "mean " << metrics::to_json(cv.mean) << '\n';
  return 0;
}

int run_eval(const Options& o) {
  const auto dir = out_dir(o);
  auto lm = load_model_dir(input(o, 0, "a model directory"));
  const auto d = load_dataset(o, input(o, 1, "a dataset CSV"));
  const auto inputs = prepare_all(d.graphs, lm.model->vocab());
  train::CB2formerTrainable tm(*lm.model, inputs, lm.task);
  std::vector<std::size_t> rows(d.records.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  auto report = train::score(tm, lm.task, d.pic50, d.active, rows, o.active_threshold);
  report.model = "cb2former";
  report.fold = "eval";
  {
    auto f = open_out(dir / "metrics.jsonl");
    metrics::write_jsonl(f, report);
  }
  write_manifest(o);
  std::cout << metrics::to_json(report) << '\n';
  return 0;
}

int run_explain(const Options& o) {
  const auto dir = out_dir(o);
  auto lm = load_model_dir(input(o, 0, "a model directory"));
  const auto g = chem::parse_smiles(input(o, 1, "a SMILES string"));
  const auto in = model::prepare(g, lm.model->vocab());
  tensor::Tape tape(tensor::Mode::Eval, false);
  model::AttentionRecord rec;
  lm.model->encode(tape, in, 0, &rec);
  const auto report = explain::aggregate_attention(rec);
  {
    auto f = open_out(dir / "importance.csv");
    explain::write_importance_csv(f, report);
  }
  explain::export_heatmap(rec, dir, "attention");
  write_manifest(o);
  for (const auto& t : report.tokens) std::cout << t.token << '\t' << csv::format_double(t.weight) << '\n';
  return 0;
}

int run_predict(const Options& o) {
  const auto dir = out_dir(o);
  auto lm = load_model_dir(input(o, 0, "a model directory"));
  std::vector<std::string> ids;
  std::vector<model::MoleculeInput> inputs;
  auto add = [&](const std::string& smi, const std::string& id) {
    inputs.push_back(model::prepare(chem::parse_smiles(smi), lm.model->vocab()));
    ids.push_back(id.empty() ? smi : id);
  };
  const std::string& src = input(o, 1, "a SMILES file or SMILES strings");
  if (fs::is_regular_file(src)) {
    std::ifstream in(src);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string smi, id;
      if (!(ls >> smi) || smi[0] == '#') continue;
      ls >> id;
      add(smi, id);
    }
  } else {
    for (std::size_t i = 1; i < o.positional.size(); ++i) add(o.positional[i], "");
  }
  const auto pred = lm.model->predict(inputs, lm.task);
  {
    auto f = open_out(dir / "predictions.csv");
    baselines::write_predictions_csv(f, ids, "cb2former", model::to_string(lm.task), pred);
  }
  write_manifest(o);
  for (std::size_t i = 0; i < ids.size(); ++i) std::cout << ids[i] << '\t' << csv::format_double(pred[i]) << '\n';
  return 0;
}

int run_canon(const Options& o) {
  std::vector<std::string> items = o.positional;
  if (items.empty() || (items.size() == 1 && items[0] == "-")) {
    items.clear();
    std::string line;
    while (std::getline(std::cin, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) items.push_back(line);
    }
  }
  std::ostringstream buf;
  for (const auto& s : items) buf << chem::canonical_smiles(s) << '\n';
  std::cout << buf.str();
  if (!o.out.empty()) {
    const auto dir = out_dir(o);
    auto f = open_out(dir / "canonical.smi");
    f << buf.str();
    write_manifest(o);
  }
  return 0;
}

int run_bench(const Options& o) {
  const auto dir = out_dir(o);
  const auto d = load_dataset(o, input(o, 0, "a dataset CSV"));
  auto tc = train_config(o);
  const auto y = targets_for(d, tc.task);
  const auto split = data::split(d.records.size(), {0.8, 0.1, 0.1}, o.seed);
  std::vector<metrics::MetricsReport> rows;
  std::vector<std::string> pred_ids;
  std::vector<std::string> pred_model;
  std::vector<double> pred_value;

  auto record = [&](const std::string& name, const std::vector<double>& pred) {
    auto r = score_predictions(d, split.test, pred, tc.task, o.active_threshold);
    r.model = name;
    r.fold = "test";
    rows.push_back(r);
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      pred_ids.push_back(d.records[split.test[i]].compound_id);
      pred_model.push_back(name);
      pred_value.push_back(pred[i]);
    }
  };

  const auto x = fingerprints(d.graphs, parse_fp_list(o.fp), o.nbits);
  for (const auto& name : split_list(o.models, ',')) {
    if (name == "cb2former") {
      const auto vocab = train_vocab(d, split.train);
      const auto inputs = prepare_all(d.graphs, vocab);
      model::CB2former m(model_config(o), vocab, o.seed);
      train::init_output_bias(m, tc.task, initial_bias(y, split.train, tc.task));
      train::CB2formerTrainable tm(m, inputs, tc.task);
      train::fit(tm, y, split.train, split.val, tc);
      auto pred = train::predict_raw(tm, split.test, 64);
      if (tc.task == model::Task::Classification) {
        for (double& p : pred) p = 1.0 / (1.0 + std::exp(-p));
      }
      record(name, pred);
    } else {
      record(name, fit_predict_baseline(name, x, y, split.train, split.val, split.test, o, tc.task));
    }
  }

  {
    auto f = open_out(dir / "comparison.csv");
    f << "model,task,n,r2,rmse,auc,accuracy\n";
    auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
    for (const auto& r : rows) {
      csv::write_row(f, {r.model, r.task, std::to_string(r.n), csv::format_double(r.r2), csv::format_double(r.rmse),
                         opt(r.auc), opt(r.accuracy)});
    }
  }
  {
    auto f = open_out(dir / "metrics.jsonl");
    for (const auto& r : rows) metrics::write_jsonl(f, r);
  }
  {
    auto f = open_out(dir / "predictions.csv");
    f << "compound_id,model,task,prediction\n";
    for (std::size_t i = 0; i < pred_ids.size(); ++i) {
      csv::write_row(f, {pred_ids[i], pred_model[i], o.task, csv::format_double(pred_value[i])});
    }
  }

  // Fingerprint combinations with the random forest: singles and pairs.
  {
    const std::vector<fp::FpKind> all = {fp::FpKind::Morgan, fp::FpKind::AtomPair, fp::FpKind::Torsion, fp::FpKind::Path};
    std::vector<std::vector<fp::FpKind>> combos;
    for (std::size_t i = 0; i < all.size(); ++i) combos.push_back({all[i]});
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = i + 1; j < all.size(); ++j) combos.push_back({all[i], all[j]});
    }
    auto f = open_out(dir / "fp_combinations.csv");
    f << "fingerprints,model,r2,rmse,auc\n";
    for (const auto& c : combos) {
      std::string label;
      for (auto k : c) label += (label.empty() ? "" : "+") + std::string(fp::to_string(k));
      const auto xc = fingerprints(d.graphs, c, o.nbits);
      const auto pred = fit_predict_baseline("rf", xc, y, split.train, split.val, split.test, o, tc.task);
      const auto r = score_predictions(d, split.test, pred, tc.task, o.active_threshold);
      csv::write_row(f, {label, "rf", csv::format_double(r.r2), csv::format_double(r.rmse),
                         r.auc ? csv::format_double(*r.auc) : ""});
    }
  }
  write_manifest(o);
  for (const auto& r : rows) std::cout << metrics::to_json(r) << '\n';
  return 0;
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Model: return 4;
  }
  return 1;
}

}  // namespace

int dispatch(int argc, char** argv) {
  kernels::configure_threads_from_env();
  Options o;
  CLI::App app{"CB2former: SMILES-based activity modelling with a GCN-fused transformer"};
  app.set_version_flag("--version", CB2_VERSION);
  app.require_subcommand(1);

  auto common = [&](CLI::App* s) {
    s->add_option("--out", o.out, "Output directory");
    s->add_option("--seed", o.seed, "Random seed");
    s->add_option("--task", o.task, "reg or clf")->check(CLI::IsMember({"reg", "clf"}));
    s->add_option("--active-threshold", o.active_threshold, "pIC50 at or above which a compound is active");
    s->add_option("--max-ratio", o.max_ratio, "Largest max/min ratio for merging duplicate measurements");
    // Positionals are taken raw from the leftovers: CLI11 would read a
    // SMILES such as [Na+] as list syntax.
    s->allow_extras();
  };
  auto model_opts = [&](CLI::App* s) {
    s->add_option("--prompts", o.prompts_file, "File with one prompt motif per line");
    s->add_option("--n-prompts", o.n_prompts, "Number of prompt tokens");
    s->add_option("--d-model", o.d_model);
    s->add_option("--heads", o.heads);
    s->add_option("--layers", o.layers);
    s->add_option("--d-ff", o.d_ff);
    s->add_option("--gcn-layers", o.gcn_layers);
    s->add_option("--dropout", o.dropout);
    s->add_option("--epochs", o.epochs);
    s->add_option("--patience", o.patience);
    s->add_option("--batch-size", o.batch_size);
    s->add_option("--lr", o.lr);
  };
  auto fp_opts = [&](CLI::App* s) {
    s->add_option("--fp", o.fp, "Comma-separated fingerprint kinds: morgan,atompair,torsion,path");
    s->add_option("--nbits", o.nbits, "Bits per fingerprint");
  };

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Sub subs[] = {
      {"ingest", "Clean an activity CSV into a dataset", run_ingest},
      {"featurize", "Write fingerprint hex columns for a CSV", run_featurize},
      {"train", "Train a model and write a checkpoint", run_train},
      {"cv", "k-fold cross-validation report", run_cv},
      {"eval", "Score a trained model on a dataset", run_eval},
      {"explain", "Attention importances and heatmaps for one SMILES", run_explain},
      {"predict", "Predict activities for SMILES", run_predict},
      {"canon", "Canonical SMILES", run_canon},
      {"bench", "Compare all models on one split", run_bench},
      {"synth", "Generate the synthetic benchmark set", run_synth},
  };
  std::map<CLI::App*, const Sub*> by_app;
  for (const auto& s : subs) {
    auto* a = app.add_subcommand(s.name, s.help);
    common(a);
    model_opts(a);
    fp_opts(a);
    a->add_option("--k", o.k, "Folds for cv");
    a->add_option("--knn-k", o.knn_k, "Neighbours for the KNN baseline");
    a->add_option("--model", o.model, "cv model: cb2former, knn, rf, ridge or mlp");
    a->add_option("--models", o.models, "bench models");
    a->add_option("--grid", o.grid, "Grid search, e.g. \"d_model=64,128;lr=0.001,0.0003\"");
    a->add_option("--n", o.n, "Molecules for synth");
    a->add_option("--trees", o.trees, "Trees in the random forest");
    by_app[a] = &s;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    for (const auto& [a, s] : by_app) {
      if (a->parsed()) {
        o.command = s->name;
        for (const auto& r : a->remaining()) {
          if (r.size() > 1 && r[0] == '-' && r[1] == '-') throw Error(ErrorCategory::Usage, "unknown option " + r);
          o.positional.push_back(r);
        }
        return s->run(o);
      }
    }
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  return dispatch(static_cast<int>(copy.size()), argv.data());
}

}  // namespace cb2::cli
