#include "cb2/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cb2/util/csv.hpp"
#include "cb2/util/hash.hpp"
#include "cb2/util/rng.hpp"

namespace cb2::explain {

namespace {

class ExplainError : public Error {
 public:
  explicit ExplainError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

ImportanceReport aggregate_attention(const model::AttentionRecord& record) {
  if (record.layers.empty() || record.layers.back().empty()) {
    throw ExplainError("attention record has no layers");
  }
  const std::size_t n = record.size();
  const std::size_t np = record.n_prompts;
  const auto& last = record.layers.back();
  ImportanceReport report;
  report.layer = record.layers.size() - 1;
  report.heads = last.size();

  std::vector<double> col(n - np, 0.0);
  for (const auto& m : last) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = np; c < n; ++c) col[c - np] += m[r * n + c];
    }
  }
  double total = 0.0;
  for (double& v : col) {
    v /= static_cast<double>(n * last.size());
    total += v;
  }
  for (std::size_t j = 0; j < col.size(); ++j) {
    TokenImportance t;
    t.token = record.tokens[np + j];
    if (j < record.spans.size()) {
      t.span_start = record.spans[j].first;
      t.span_end = record.spans[j].second;
    }
    t.weight = total > 0.0 ? col[j] / total : 1.0 / static_cast<double>(col.size());
    report.tokens.push_back(std::move(t));
  }
  return report;
}

void write_importance_csv(std::ostream& out, const ImportanceReport& report) {
  out << "# aggregation: " << report.rule << " (layer " << report.layer << ", " << report.heads << " heads)\n";
  out << "token,span_start,span_end,weight\n";
  for (const auto& t : report.tokens) {
    csv::write_row(out, {t.token, std::to_string(t.span_start), std::to_string(t.span_end), csv::format_double(t.weight)});
  }
}

std::vector<GroupImportance> group_importance(const ImportanceReport& report, const std::vector<TokenGroup>& groups) {
  std::vector<GroupImportance> out;
  for (const auto& g : groups) {
    GroupImportance gi;
    gi.label = g.label;
    for (const auto& t : report.tokens) {
      if (t.span_start >= g.begin && t.span_end <= g.end) gi.weight += t.weight;
    }
    out.push_back(std::move(gi));
  }
  return out;
}

std::string heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const double lo[3] = {224, 224, 224};
  const double hi[3] = {215, 48, 39};
  char buf[8];
  int c[3];
  for (int i = 0; i < 3; ++i) c[i] = static_cast<int>(std::lround(lo[i] + (hi[i] - lo[i]) * v));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

void write_heatmap_csv(std::ostream& out, const std::vector<std::string>& tokens, const std::vector<double>& values) {
  const std::size_t n = tokens.size();
  std::vector<std::string> row{""};
  row.insert(row.end(), tokens.begin(), tokens.end());
  csv::write_row(out, row);
  for (std::size_t r = 0; r < n; ++r) {
    row.assign(1, tokens[r]);
    for (std::size_t c = 0; c < n; ++c) row.push_back(csv::format_double(values[r * n + c]));
    csv::write_row(out, row);
  }
}

HeatmapMatrix read_heatmap_csv(std::istream& in) {
  HeatmapMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw ExplainError("empty heatmap CSV");
  auto header = csv::split_line(line);
  m.tokens.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f.size() != m.tokens.size() + 1) throw ExplainError("ragged heatmap row");
    for (std::size_t i = 1; i < f.size(); ++i) m.values.push_back(std::stod(f[i]));
  }
  if (m.values.size() != m.tokens.size() * m.tokens.size()) throw ExplainError("heatmap is not square");
  return m;
}

std::vector<std::filesystem::path> export_heatmap(const model::AttentionRecord& record,
                                                  const std::filesystem::path& dir, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::vector<std::filesystem::path> written;
  const std::size_t n = record.size();

  for (std::size_t l = 0; l < record.layers.size(); ++l) {
    for (std::size_t h = 0; h < record.layers[l].size(); ++h) {
      const auto path = dir / (stem + "_l" + std::to_string(l) + "_h" + std::to_string(h) + ".csv");
      std::ofstream out(path);
      if (!out) throw Error(ErrorCategory::Data, "IoError: cannot write " + path.string());
      write_heatmap_csv(out, record.tokens, record.layers[l][h]);
      written.push_back(path);
    }
  }

  const bool labels = n <= 30;
  const double cell = labels ? 18.0 : std::max(2.0, 540.0 / static_cast<double>(std::max<std::size_t>(n, 1)));
  const double margin = labels ? 70.0 : 24.0;
  const double panel = margin + cell * static_cast<double>(n) + 16.0;
  const std::size_t cols = record.layers.empty() ? 1 : std::max<std::size_t>(1, record.layers.front().size());
  const std::size_t rows = std::max<std::size_t>(1, record.layers.size());
  const double width = panel * static_cast<double>(cols);
  const double height = panel * static_cast<double>(rows) + 20.0;

  const auto svg_path = dir / (stem + ".svg");
  std::ofstream svg(svg_path);
  if (!svg) throw Error(ErrorCategory::Data, "IoError: cannot write " + svg_path.string());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"monospace\" font-size=\"9\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (std::size_t l = 0; l < record.layers.size(); ++l) {
    for (std::size_t h = 0; h < record.layers[l].size(); ++h) {
      const double ox = panel * static_cast<double>(h);
      const double oy = panel * static_cast<double>(l) + 20.0;
      svg << "<text x=\"" << ox + 4 << "\" y=\"" << oy - 6 << "\">layer " << l << " head " << h << "</text>\n";
      const auto& m = record.layers[l][h];
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          svg << "<rect x=\"" << ox + margin + cell * static_cast<double>(c) << "\" y=\""
              << oy + margin + cell * static_cast<double>(r) << "\" width=\"" << cell << "\" height=\"" << cell
              << "\" fill=\"" << heat_color(m[r * n + c]) << "\"/>\n";
        }
      }
      if (labels) {
        for (std::size_t i = 0; i < n; ++i) {
          const std::string tok = xml_escape(record.tokens[i]);
          svg << "<text x=\"" << ox + margin - 3 << "\" y=\"" << oy + margin + cell * (static_cast<double>(i) + 0.7)
              << "\" text-anchor=\"end\">" << tok << "</text>\n";
          const double tx = ox + margin + cell * (static_cast<double>(i) + 0.7);
          svg << "<text x=\"" << tx << "\" y=\"" << oy + margin - 3 << "\" transform=\"rotate(-90 " << tx << ' '
              << oy + margin - 3 << ")\">" << tok << "</text>\n";
        }
      }
    }
  }
  svg << "</svg>\n";
  written.push_back(svg_path);
  return written;
}

double ShapleyReport::efficiency_residual() const {
  double s = 0.0;
  for (double v : phi) s += v;
  return s - (f_x - f_baseline);
}

double ShapleyReport::aggregate_stderr() const {
  double s = 0.0;
  for (double v : stderr_) s += v * v;
  return std::sqrt(s);
}

ShapleyReport shapley_mc(const FingerprintModel& f, const fp::BitVector& x, const fp::BitVector& baseline,
                         std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 100) throw Error(ErrorCategory::Usage, "shapley_mc needs at least 100 samples");
  if (x.size() != baseline.size()) throw Error(ErrorCategory::Data, "shapley_mc: fingerprint length mismatch");
  ShapleyReport rep;
  rep.samples = n_samples;
  rep.seed = seed;
  for (std::size_t b = 0; b < x.size(); ++b) {
    if (x.test(b) != baseline.test(b)) rep.features.push_back(b);
  }
  rep.f_x = f(x);
  rep.f_baseline = f(baseline);
  const std::size_t d = rep.features.size();
  rep.phi.assign(d, 0.0);
  rep.stderr_.assign(d, 0.0);
  if (d == 0) return rep;

  // contrib[s * d + i]: marginal contribution of feature i in sample s.
  std::vector<double> contrib(n_samples * d);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n_samples); ++si) {
    const auto s = static_cast<std::size_t>(si);
    Rng rng(mix_seed(seed, s));
    const auto order = rng.permutation(d);
    fp::BitVector z = baseline;
    double prev = rep.f_baseline;
    for (std::size_t i : order) {
      const std::size_t bit = rep.features[i];
      if (x.test(bit)) {
        z.set(bit);
      } else {
        z.reset(bit);
      }
      const double cur = f(z);
      contrib[s * d + i] = cur - prev;
      prev = cur;
    }
  }
  const double ns = static_cast<double>(n_samples);
  for (std::size_t i = 0; i < d; ++i) {
    double sum = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) sum += contrib[s * d + i];
    const double mean = sum / ns;
    double ss = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) ss += (contrib[s * d + i] - mean) * (contrib[s * d + i] - mean);
    rep.phi[i] = mean;
    rep.stderr_[i] = std::sqrt(ss / (ns - 1.0) / ns);
  }
  return rep;
}

void write_shapley_csv(std::ostream& out, const ShapleyReport& report) {
  out << "feature_bit,phi,stderr\n";
  for (std::size_t i = 0; i < report.features.size(); ++i) {
    csv::write_row(out, {std::to_string(report.features[i]), csv::format_double(report.phi[i]),
                         csv::format_double(report.stderr_[i])});
  }
}

}  // namespace cb2::explain
