#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cb2/fingerprint.hpp"
#include "cb2/model/cb2former.hpp"

namespace cb2::explain {

inline constexpr const char* kAggregationRule =
    "final layer; mean over heads; mean attention received from all query rows; SMILES-token columns only, "
    "renormalized to sum to 1";

struct TokenImportance {
  std::string token;
  std::size_t span_start = 0;
  std::size_t span_end = 0;
  double weight = 0.0;
};

struct ImportanceReport {
  std::vector<TokenImportance> tokens;
  std::size_t layer = 0;
  std::size_t heads = 0;
  std::string rule = kAggregationRule;
};

ImportanceReport aggregate_attention(const model::AttentionRecord& record);

// "# <rule>" comment line, then token,span_start,span_end,weight.
void write_importance_csv(std::ostream& out, const ImportanceReport& report);

struct TokenGroup {
  std::string label;
  std::size_t begin = 0;  // byte range in the SMILES string
  std::size_t end = 0;
};

struct GroupImportance {
  std::string label;
  double weight = 0.0;
};

// Sums the weights of tokens lying entirely inside each group's range.
std::vector<GroupImportance> group_importance(const ImportanceReport& report, const std::vector<TokenGroup>& groups);

struct HeatmapMatrix {
  std::vector<std::string> tokens;
  std::vector<double> values;  // row-major, tokens.size()^2
};

// One CSV per layer/head (<stem>_l<L>_h<H>.csv, token-labeled header row
// and first column) plus <stem>.svg with every layer/head as a panel.
// Returns the written paths.
std::vector<std::filesystem::path> export_heatmap(const model::AttentionRecord& record,
                                                  const std::filesystem::path& dir,
                                                  const std::string& stem = "attention");

void write_heatmap_csv(std::ostream& out, const std::vector<std::string>& tokens, const std::vector<double>& values);
HeatmapMatrix read_heatmap_csv(std::istream& in);

// Linear map from light gray (0) to warm red (1), as "#rrggbb".
std::string heat_color(double v);

struct ShapleyReport {
  std::vector<std::size_t> features;  // bits where x and baseline differ
  std::vector<double> phi;
  std::vector<double> stderr_;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double f_x = 0.0;
  double f_baseline = 0.0;

  double efficiency_residual() const;
  double aggregate_stderr() const;  // sqrt of summed squared errors
};

using FingerprintModel = std::function<double(const fp::BitVector&)>;

// Permutation-sampling estimate: each sampled order switches the differing
// bits from baseline to x one by one and credits each bit with the change
// in f. `f` must be safe to call concurrently.
ShapleyReport shapley_mc(const FingerprintModel& f, const fp::BitVector& x, const fp::BitVector& baseline,
                         std::size_t n_samples, std::uint64_t seed);

// feature_bit,phi,stderr
void write_shapley_csv(std::ostream& out, const ShapleyReport& report);

}  // namespace cb2::explain
