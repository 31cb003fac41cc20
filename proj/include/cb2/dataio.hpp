#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cb2/util/error.hpp"

namespace cb2::data {

enum class MeasureType { Ki, IC50, EC50 };
enum class Units { nM, uM, M };

std::string to_string(MeasureType t);
std::string to_string(Units u);
MeasureType parse_measure_type(const std::string& s);
Units parse_units(const std::string& s);

enum class DataErrorKind { MissingColumn, BadValue, NonPositiveValue, TooFewRecords, Io };

class DataError : public Error {
 public:
  DataError(DataErrorKind kind, const std::string& what) : Error(ErrorCategory::Data, what), kind_(kind) {}
  DataErrorKind kind() const noexcept { return kind_; }

 private:
  DataErrorKind kind_;
};

struct ActivityRecord {
  std::string compound_id;
  std::string smiles;
  MeasureType measure_type = MeasureType::IC50;
  double value = 0.0;
  Units units = Units::nM;
  double pic50 = 0.0;
  bool active = false;
  std::size_t row = 0;  // 1-based data row in the source file
};

inline constexpr double kDefaultActiveThreshold = 6.0;
inline constexpr double kDefaultDuplicateRatio = 10.0;

double to_molar(double value, Units units);
// -log10 of the molar value; throws NonPositiveValue for value <= 0.
double to_pic50(double value, Units units);

struct Reject {
  std::size_t row = 0;  // 1-based data row (the header is not counted)
  std::string reason;
};

struct LoadResult {
  std::vector<ActivityRecord> records;
  std::vector<Reject> rejects;
};

// Header must contain compound_id,smiles,measure_type,value,units (any
// order, extra columns ignored). Bad rows land in `rejects`.
LoadResult read_csv(std::istream& in, double active_threshold = kDefaultActiveThreshold);
LoadResult load_csv(const std::filesystem::path& path, double active_threshold = kDefaultActiveThreshold);

struct CleanOptions {
  double max_ratio = kDefaultDuplicateRatio;
  double active_threshold = kDefaultActiveThreshold;
};

struct CleanReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t merged = 0;  // records folded into a kept duplicate
  std::map<std::string, std::size_t> dropped;  // reason -> count
  std::vector<std::pair<std::string, std::string>> dropped_ids;  // (compound_id, reason)
};

struct CleanResult {
  std::vector<ActivityRecord> kept;
  CleanReport report;
};

CleanResult clean(const std::vector<ActivityRecord>& records, const CleanOptions& options = {});

void label(std::vector<ActivityRecord>& records, double threshold_pic50 = kDefaultActiveThreshold);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
};

DatasetSplit split(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed);

// Cleaned-dataset CSV: the input schema plus pic50 and active columns.
void write_dataset(std::ostream& out, const std::vector<ActivityRecord>& records);
void write_rejects(std::ostream& out, const std::vector<Reject>& rejects);

}  // namespace cb2::data
