#include "cb2/dataio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "cb2/chem/canon.hpp"
#include "cb2/util/csv.hpp"
#include "cb2/util/rng.hpp"

namespace cb2::data {

std::string to_string(MeasureType t) {
  switch (t) {
    case MeasureType::Ki: return "Ki";
    case MeasureType::IC50: return "IC50";
    case MeasureType::EC50: return "EC50";
  }
  return "?";
}

std::string to_string(Units u) {
  switch (u) {
    case Units::nM: return "nM";
    case Units::uM: return "uM";
    case Units::M: return "M";
  }
  return "?";
}

MeasureType parse_measure_type(const std::string& s) {
  if (s == "Ki") return MeasureType::Ki;
  if (s == "IC50") return MeasureType::IC50;
  if (s == "EC50") return MeasureType::EC50;
  throw DataError(DataErrorKind::BadValue, "unknown measure_type '" + s + "'");
}

Units parse_units(const std::string& s) {
  if (s == "nM") return Units::nM;
  if (s == "uM" || s == "\xC2\xB5M" || s == "\xCE\xBCM") return Units::uM;
  if (s == "M") return Units::M;
  throw DataError(DataErrorKind::BadValue, "unknown units '" + s + "'");
}

double to_molar(double value, Units units) {
  switch (units) {
    case Units::nM: return value * 1e-9;
    case Units::uM: return value * 1e-6;
    case Units::M: return value;
  }
  return value;
}

double to_pic50(double value, Units units) {
  if (!(value > 0.0)) {
    throw DataError(DataErrorKind::NonPositiveValue, "activity value must be positive");
  }
  // log10 of the scaled value loses an ulp or two; subtract exact exponents.
  switch (units) {
    case Units::nM: return 9.0 - std::log10(value);
    case Units::uM: return 6.0 - std::log10(value);
    case Units::M: return -std::log10(value);
  }
  return -std::log10(to_molar(value, units));
}

namespace {

const std::array<const char*, 5> kRequired = {"compound_id", "smiles", "measure_type", "value", "units"};

double parse_positive(const std::string& text, std::size_t row) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw DataError(DataErrorKind::BadValue,
                    "BadValue(row " + std::to_string(row) + ", value): '" + text + "' is not a number");
  }
  if (!(v > 0.0)) {
    throw DataError(DataErrorKind::BadValue,
                    "BadValue(row " + std::to_string(row) + ", value): must be positive");
  }
  return v;
}

}  // namespace

LoadResult read_csv(std::istream& in, double active_threshold) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(DataErrorKind::MissingColumn, "MissingColumn(compound_id): input has no header row");
  }
  const auto header = csv::split_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* name : kRequired) {
    if (!col.count(name)) throw DataError(DataErrorKind::MissingColumn, std::string("MissingColumn(") + name + ")");
  }

  LoadResult out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto f = csv::split_line(line);
    try {
      auto field = [&](const char* name) -> const std::string& {
        const std::size_t i = col.at(name);
        if (i >= f.size()) {
          throw DataError(DataErrorKind::BadValue,
                          "BadValue(row " + std::to_string(row) + ", " + name + "): missing field");
        }
        return f[i];
      };
      ActivityRecord r;
      r.compound_id = field("compound_id");
      r.smiles = field("smiles");
      if (r.smiles.empty()) {
        throw DataError(DataErrorKind::BadValue, "BadValue(row " + std::to_string(row) + ", smiles): empty");
      }
      try {
        r.measure_type = parse_measure_type(field("measure_type"));
        r.units = parse_units(field("units"));
      } catch (const DataError& e) {
        throw DataError(DataErrorKind::BadValue, "BadValue(row " + std::to_string(row) + "): " + e.what());
      }
      r.value = parse_positive(field("value"), row);
      r.pic50 = to_pic50(r.value, r.units);
      r.active = r.pic50 >= active_threshold;
      r.row = row;
      out.records.push_back(std::move(r));
    } catch (const DataError& e) {
      out.rejects.push_back({row, e.what()});
    }
  }
  return out;
}

LoadResult load_csv(const std::filesystem::path& path, double active_threshold) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::Io, "cannot open " + path.string());
  return read_csv(in, active_threshold);
}

CleanResult clean(const std::vector<ActivityRecord>& records, const CleanOptions& options) {
  CleanResult result;
  result.report.input = records.size();

  struct Group {
    std::vector<ActivityRecord> members;
  };
  std::vector<Group> groups;
  std::map<std::pair<std::string, MeasureType>, std::size_t> index;

  for (const auto& r : records) {
    std::string canon;
    try {
      canon = chem::canonical_smiles(r.smiles);
    } catch (const chem::ParseError& e) {
      const std::string reason(chem::to_string(e.kind()));
      ++result.report.dropped[reason];
      result.report.dropped_ids.emplace_back(r.compound_id, reason);
      continue;
    }
    ActivityRecord c = r;
    c.smiles = canon;
    auto key = std::make_pair(canon, r.measure_type);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, groups.size());
      groups.push_back({{c}});
    } else {
      groups[it->second].members.push_back(std::move(c));
    }
  }

  for (auto& g : groups) {
    ActivityRecord keep = g.members.front();
    if (g.members.size() > 1) {
      double lo = INFINITY, hi = 0.0, log_sum = 0.0;
      for (const auto& m : g.members) {
        const double molar = to_molar(m.value, m.units);
        lo = std::min(lo, molar);
        hi = std::max(hi, molar);
        log_sum += std::log(molar);
      }
      if (hi / lo > options.max_ratio) {
        const std::string reason = "InconsistentDuplicate";
        result.report.dropped[reason] += g.members.size();
        for (const auto& m : g.members) result.report.dropped_ids.emplace_back(m.compound_id, reason);
        continue;
      }
      const double molar = std::exp(log_sum / static_cast<double>(g.members.size()));
      keep.value = molar / to_molar(1.0, keep.units);
      result.report.merged += g.members.size() - 1;
    }
    keep.pic50 = to_pic50(keep.value, keep.units);
    keep.active = keep.pic50 >= options.active_threshold;
    result.kept.push_back(std::move(keep));
  }
  result.report.kept = result.kept.size();
  return result;
}

void label(std::vector<ActivityRecord>& records, double threshold_pic50) {
  for (auto& r : records) r.active = r.pic50 >= threshold_pic50;
}

DatasetSplit split(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw DataError(DataErrorKind::BadValue, "split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError(DataErrorKind::BadValue, "split fractions must sum to 1");
  if (n < 3) throw DataError(DataErrorKind::TooFewRecords, "TooFewRecords: need at least 3 records to split");

  Rng rng(seed);
  const auto perm = rng.permutation(n);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));
  DatasetSplit s;
  s.seed = seed;
  s.fractions = fractions;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DataError(DataErrorKind::BadValue, "k must be at least 2");
  if (n < k) {
    throw DataError(DataErrorKind::TooFewRecords,
                    "TooFewRecords: " + std::to_string(n) + " records for " + std::to_string(k) + " folds");
  }
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> parts(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    parts[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                    perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].val = parts[f];
    for (std::size_t o = 0; o < k; ++o) {
      if (o != f) folds[f].train.insert(folds[f].train.end(), parts[o].begin(), parts[o].end());
    }
  }
  return folds;
}

void write_dataset(std::ostream& out, const std::vector<ActivityRecord>& records) {
  out << "compound_id,smiles,measure_type,value,units,pic50,active\n";
  for (const auto& r : records) {
    csv::write_row(out, {r.compound_id, r.smiles, to_string(r.measure_type), csv::format_double(r.value),
                         to_string(r.units), csv::format_double(r.pic50), r.active ? "1" : "0"});
  }
}

void write_rejects(std::ostream& out, const std::vector<Reject>& rejects) {
  out << "row,reason\n";
  for (const auto& r : rejects) csv::write_row(out, {std::to_string(r.row), r.reason});
}

}  // namespace cb2::data
