#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "cb2/dataio.hpp"

using namespace cb2::data;

namespace {

LoadResult read(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

ActivityRecord rec(const std::string& id, const std::string& smi, double nm) {
  ActivityRecord r;
  r.compound_id = id;
  r.smiles = smi;
  r.value = nm;
  r.units = Units::nM;
  r.pic50 = to_pic50(nm, Units::nM);
  return r;
}

}  // namespace

TEST(Units, PIC50Conversions) {
  EXPECT_EQ(to_pic50(1.0, Units::nM), 9.0);
  EXPECT_EQ(to_pic50(1.0, Units::uM), 6.0);
  EXPECT_EQ(to_pic50(1e-6, Units::M), 6.0);
  EXPECT_NEAR(to_pic50(10.0, Units::nM), 8.0, 1e-15);
  EXPECT_NEAR(to_pic50(250.0, Units::nM), 9.0 - std::log10(250.0), 1e-15);
  EXPECT_NEAR(to_molar(3.0, Units::uM), 3e-6, 1e-21);
  EXPECT_EQ(parse_units("µM"), Units::uM);
  EXPECT_EQ(parse_units("uM"), Units::uM);
  EXPECT_EQ(parse_measure_type("Ki"), MeasureType::Ki);
}

TEST(ReadCsv, ParsesAndLabels) {
  const auto r = read(
      "compound_id,smiles,measure_type,value,units,extra\n"
      "a,CCO,IC50,100,nM,x\n"
      "b,c1ccccc1,Ki,2,uM,y\n");
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_TRUE(r.rejects.empty());
  EXPECT_NEAR(r.records[0].pic50, 7.0, 1e-12);
  EXPECT_TRUE(r.records[0].active);
  EXPECT_FALSE(r.records[1].active);
  EXPECT_EQ(r.records[1].measure_type, MeasureType::Ki);
}

TEST(ReadCsv, ColumnOrderIsFree) {
  const auto r = read("units,value,smiles,compound_id,measure_type\nnM,5,CC,z,EC50\n");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].compound_id, "z");
}

TEST(ReadCsv, MissingColumnThrows) {
  try {
    read("compound_id,smiles,value,units\na,C,1,nM\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataErrorKind::MissingColumn);
    EXPECT_NE(std::string(e.what()).find("measure_type"), std::string::npos);
  }
}

TEST(ReadCsv, BadRowsAreRejectedWithRowNumbers) {
  const auto r = read(
      "compound_id,smiles,measure_type,value,units\n"
      "a,CCO,IC50,abc,nM\n"
      "b,CCO,IC50,-3,nM\n"
      "c,CCO,IC50,0,nM\n"
      "d,CCO,XC50,1,nM\n"
      "e,CCO,IC50,1,mg\n"
      "f,,IC50,1,nM\n"
      "g,CCO,IC50,1,nM\n");
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.rejects.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(r.rejects[i].row, i + 1);
    EXPECT_EQ(r.rejects[i].reason.rfind("BadValue", 0), 0u) << r.rejects[i].reason;
  }
}

TEST(Clean, MergesConsistentDuplicatesByGeometricMean) {
  const std::vector<ActivityRecord> in = {rec("a", "OCC", 10.0), rec("b", "CCO", 40.0), rec("c", "CCN", 5.0)};
  const auto out = clean(in);
  ASSERT_EQ(out.kept.size(), 2u);
  EXPECT_EQ(out.kept[0].compound_id, "a");
  EXPECT_EQ(out.kept[0].smiles, "CCO");
  EXPECT_NEAR(out.kept[0].value, 20.0, 1e-9);
  EXPECT_NEAR(out.kept[0].pic50, 9.0 - std::log10(20.0), 1e-12);
  EXPECT_EQ(out.report.merged, 1u);
  EXPECT_EQ(out.report.kept, 2u);
}

TEST(Clean, DropsInconsistentDuplicates) {
  const std::vector<ActivityRecord> in = {rec("a", "CCO", 1.0), rec("b", "OCC", 11.0), rec("c", "CCN", 5.0)};
  const auto out = clean(in);
  ASSERT_EQ(out.kept.size(), 1u);
  EXPECT_EQ(out.report.dropped.at("InconsistentDuplicate"), 2u);
  // Exactly at the ratio limit still merges.
  const auto edge = clean({rec("a", "CCO", 1.0), rec("b", "OCC", 10.0)});
  EXPECT_EQ(edge.kept.size(), 1u);
}

TEST(Clean, DifferentMeasureTypesAreNotDuplicates) {
  auto a = rec("a", "CCO", 1.0);
  auto b = rec("b", "CCO", 500.0);
  b.measure_type = MeasureType::Ki;
  EXPECT_EQ(clean({a, b}).kept.size(), 2u);
}

TEST(Clean, UnparseableSmilesDroppedWithParseReason) {
  const auto out = clean({rec("a", "C1CC", 1.0), rec("b", "CCO", 1.0)});
  EXPECT_EQ(out.kept.size(), 1u);
  EXPECT_EQ(out.report.dropped.at("UnmatchedRingClosure"), 1u);
  EXPECT_EQ(out.report.dropped_ids.front().first, "a");
}

TEST(Split, PartitionsAllRows) {
  for (std::size_t n : {3u, 10u, 101u, 2000u}) {
    const auto s = split(n, {0.8, 0.1, 0.1}, 5);
    std::set<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), n);
    EXPECT_EQ(s.train.size(), static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n))));
  }
  EXPECT_EQ(split(50, {0.8, 0.1, 0.1}, 1).train, split(50, {0.8, 0.1, 0.1}, 1).train);
  EXPECT_NE(split(50, {0.8, 0.1, 0.1}, 1).train, split(50, {0.8, 0.1, 0.1}, 2).train);
  EXPECT_THROW(split(2, {0.8, 0.1, 0.1}, 1), DataError);
  EXPECT_THROW(split(10, {0.8, 0.1, 0.2}, 1), DataError);
}

TEST(KFold, EachRowValidatedExactlyOnce) {
  for (std::size_t n : {5u, 23u, 100u}) {
    const auto folds = kfold(n, 5, 3);
    ASSERT_EQ(folds.size(), 5u);
    std::vector<int> seen(n, 0);
    for (const auto& f : folds) {
      EXPECT_EQ(f.train.size() + f.val.size(), n);
      for (auto i : f.val) ++seen[i];
      std::set<std::size_t> tr(f.train.begin(), f.train.end());
      for (auto i : f.val) EXPECT_FALSE(tr.count(i));
    }
    for (int c : seen) EXPECT_EQ(c, 1);
    // Fold sizes differ by at most one.
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.val.size());
      hi = std::max(hi, f.val.size());
    }
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(Writers, DatasetRoundTrips) {
  auto a = rec("a", "CCO", 12.5);
  a.active = a.pic50 >= 6.0;
  std::ostringstream out;
  write_dataset(out, {a});
  std::istringstream in(out.str());
  const auto back = read_csv(in);
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(back.records[0].value, 12.5);
  EXPECT_EQ(back.records[0].pic50, a.pic50);

  std::ostringstream rj;
  write_rejects(rj, {{3, "BadValue(row 3, value): x, y"}});
  EXPECT_EQ(rj.str(), "row,reason\n3,\"BadValue(row 3, value): x, y\"\n");
}
