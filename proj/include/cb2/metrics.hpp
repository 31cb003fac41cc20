#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "cb2/util/error.hpp"

namespace cb2::metrics {

enum class MetricErrorKind { ZeroVariance, OneClassOnly, Empty, LengthMismatch };

class MetricError : public Error {
 public:
  MetricError(MetricErrorKind kind, const std::string& what) : Error(ErrorCategory::Data, what), kind_(kind) {}
  MetricErrorKind kind() const noexcept { return kind_; }

 private:
  MetricErrorKind kind_;
};

double ss_res(std::span<const double> y, std::span<const double> yhat);
double ss_tot(std::span<const double> y);
double r2(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);
// Mann-Whitney form: P(score+ > score-) + 0.5 P(tie), via average ranks.
double auc(std::span<const int> labels, std::span<const double> scores);
double accuracy(std::span<const int> labels, std::span<const double> probabilities, double threshold = 0.5);

struct MetricsReport {
  std::string model;
  std::string task;
  std::string fold;  // "0".."k-1", "mean", "std", "test", ...
  std::size_t n = 0;
  double r2 = 0.0;
  double rmse = 0.0;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  std::optional<double> auc;
  std::optional<double> accuracy;
};

// y: true pActivity; yhat: predictions; active/score: labels and ranking
// scores for auc/accuracy (score is a probability for classification).
// r2 is NaN when y has no variance; auc is empty with only one class.
MetricsReport evaluate(std::span<const double> y, std::span<const double> yhat, std::span<const int> active,
                       std::span<const double> score, double threshold = 0.5);

// One JSON object per line.
void write_jsonl(std::ostream& out, const MetricsReport& r);
std::string to_json(const MetricsReport& r);

}  // namespace cb2::metrics
