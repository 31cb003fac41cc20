#include "cb2/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

#include "json.hpp"

namespace cb2::metrics {

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) throw MetricError(MetricErrorKind::LengthMismatch, "LengthMismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw MetricError(MetricErrorKind::Empty, "metric of an empty set");
}

}  // namespace

double ss_res(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y.size(), yhat.size());
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return s;
}

double ss_tot(std::span<const double> y) {
  if (y.empty()) throw MetricError(MetricErrorKind::Empty, "metric of an empty set");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double s = 0.0;
  for (double v : y) s += (v - mean) * (v - mean);
  return s;
}

double r2(std::span<const double> y, std::span<const double> yhat) {
  const double res = ss_res(y, yhat);
  const double tot = ss_tot(y);
  if (y.size() < 2 || tot == 0.0) throw MetricError(MetricErrorKind::ZeroVariance, "ZeroVariance: r2 needs non-constant targets");
  return 1.0 - res / tot;
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  return std::sqrt(ss_res(y, yhat) / static_cast<double>(y.size()));
}

double auc(std::span<const int> labels, std::span<const double> scores) {
  check_pair(labels.size(), scores.size());
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average 1-based ranks over tie groups, summed for positives.
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t q = i; q < j; ++q) {
      if (labels[order[q]]) {
        pos_rank_sum += avg;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError(MetricErrorKind::OneClassOnly, "OneClassOnly: auc needs both classes");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double accuracy(std::span<const int> labels, std::span<const double> probabilities, double threshold) {
  check_pair(labels.size(), probabilities.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    if (predicted == (labels[i] != 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

MetricsReport evaluate(std::span<const double> y, std::span<const double> yhat, std::span<const int> active,
                       std::span<const double> score, double threshold) {
  MetricsReport r;
  r.n = y.size();
  r.ss_res = ss_res(y, yhat);
  r.ss_tot = ss_tot(y);
  r.rmse = std::sqrt(r.ss_res / static_cast<double>(r.n));
  r.r2 = r.ss_tot > 0.0 && r.n >= 2 ? 1.0 - r.ss_res / r.ss_tot : std::nan("");
  try {
    r.auc = auc(active, score);
  } catch (const MetricError& e) {
    if (e.kind() != MetricErrorKind::OneClassOnly) throw;
  }
  r.accuracy = accuracy(active, score, threshold);
  return r;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["task"] = r.task;
  j["fold"] = r.fold;
  j["n"] = r.n;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  j["r2"] = num(r.r2);
  j["rmse"] = num(r.rmse);
  j["ss_res"] = num(r.ss_res);
  j["ss_tot"] = num(r.ss_tot);
  j["auc"] = r.auc ? num(*r.auc) : nlohmann::ordered_json(nullptr);
  j["accuracy"] = r.accuracy ? num(*r.accuracy) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

void write_jsonl(std::ostream& out, const MetricsReport& r) { out << to_json(r) << '\n'; }

}  // namespace cb2::metrics
