#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cb2/explain.hpp"
#include "model_fixture.hpp"

using namespace cb2;
using namespace cb2::explain;

namespace {

model::AttentionRecord toy_record() {
  model::AttentionRecord r;
  r.n_prompts = 1;
  r.tokens = {"<p0>", "C", "O"};
  r.spans = {{0, 1}, {1, 2}};
  // rows sum to 1
  r.layers = {{{1, 0, 0, 0, 1, 0, 0, 0, 1}},
              {{0.2, 0.3, 0.5, 0.1, 0.1, 0.8, 0.4, 0.4, 0.2}, {0.0, 0.5, 0.5, 0.2, 0.2, 0.6, 0.0, 1.0, 0.0}}};
  return r;
}

}  // namespace

TEST(Importance, FinalLayerColumnMeansRenormalized) {
  const auto rep = aggregate_attention(toy_record());
  ASSERT_EQ(rep.tokens.size(), 2u);
  EXPECT_EQ(rep.layer, 1u);
  EXPECT_EQ(rep.heads, 2u);
  // column sums over both heads: C = 0.8 + 1.7, O = 1.5 + 1.1
  EXPECT_NEAR(rep.tokens[0].weight, 2.5 / 5.1, 1e-15);
  EXPECT_NEAR(rep.tokens[1].weight, 2.6 / 5.1, 1e-15);
  EXPECT_EQ(rep.tokens[1].token, "O");
  EXPECT_EQ(rep.tokens[1].span_start, 1u);
}

TEST(Importance, RealModelWeightsSumToOne) {
  const auto gs = test::graphs({"CC(=O)Nc1ccc(O)cc1"});
  const auto vocab = model::Vocab::build(gs);
  model::CB2former m(test::small_config(), vocab, 3);
  const auto in = model::prepare(gs[0], vocab);
  tensor::Tape tape(tensor::Mode::Eval, false);
  model::AttentionRecord rec;
  m.encode(tape, in, 0, &rec);
  const auto rep = aggregate_attention(rec);
  double s = 0.0;
  for (const auto& t : rep.tokens) {
    EXPECT_GE(t.weight, 0.0);
    s += t.weight;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(rep.tokens.size(), rec.size() - rec.n_prompts);

  std::ostringstream out;
  write_importance_csv(out, rep);
  EXPECT_EQ(out.str().rfind("# aggregation: ", 0), 0u);
  EXPECT_NE(out.str().find("\ntoken,span_start,span_end,weight\n"), std::string::npos);
}

TEST(Importance, GroupsSumContainedTokens) {
  const auto rep = aggregate_attention(toy_record());
  const auto g = group_importance(rep, {{"all", 0, 2}, {"first", 0, 1}, {"none", 5, 9}});
  EXPECT_NEAR(g[0].weight, 1.0, 1e-15);
  EXPECT_NEAR(g[1].weight, 2.5 / 5.1, 1e-15);
  EXPECT_EQ(g[2].weight, 0.0);
}

TEST(Importance, EmptyRecordThrows) {
  EXPECT_THROW(aggregate_attention(model::AttentionRecord{}), Error);
}

TEST(Heatmap, ColorEndpoints) {
  EXPECT_EQ(heat_color(0.0), "#e0e0e0");
  EXPECT_EQ(heat_color(1.0), "#d73027");
  EXPECT_EQ(heat_color(-3.0), heat_color(0.0));
  EXPECT_EQ(heat_color(7.0), heat_color(1.0));
}

TEST(Heatmap, CsvRoundTripIsExact) {
  const auto rec = toy_record();
  std::stringstream s;
  write_heatmap_csv(s, rec.tokens, rec.layers[1][0]);
  const auto m = read_heatmap_csv(s);
  EXPECT_EQ(m.tokens, rec.tokens);
  EXPECT_EQ(m.values, rec.layers[1][0]);
}

TEST(Heatmap, ExportWritesOneCsvPerHeadAndAnSvg) {
  const auto dir = std::filesystem::temp_directory_path() / "cb2_heatmap_test";
  std::filesystem::remove_all(dir);
  const auto files = export_heatmap(toy_record(), dir, "mol");
  ASSERT_EQ(files.size(), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "mol_l1_h1.csv"));
  std::ifstream svg(dir / "mol.svg");
  std::string text((std::istreambuf_iterator<char>(svg)), {});
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  EXPECT_NE(text.find("layer 1 head 1"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Shapley, LinearModelIsExactAndEfficient) {
  const std::size_t n = 32;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::sin(static_cast<double>(i) + 1.0);
  FingerprintModel f = [&](const fp::BitVector& z) {
    double s = 0.3;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * z.test(i);
    return s;
  };
  fp::BitVector x(n), b(n);
  for (std::size_t i = 0; i < n; i += 3) x.set(i);
  for (std::size_t i = 0; i < n; i += 4) b.set(i);
  const auto rep = shapley_mc(f, x, b, 200, 1);
  for (std::size_t k = 0; k < rep.features.size(); ++k) {
    const auto i = rep.features[k];
    EXPECT_NEAR(rep.phi[k], w[i] * (x.test(i) - b.test(i)), 1e-12);
  }
  EXPECT_NEAR(rep.efficiency_residual(), 0.0, 1e-12);
}

TEST(Shapley, InteractionSplitsEvenly) {
  // f = z0 + 2 z1 + 3 z0 z1: exact values 2.5 and 3.5
  FingerprintModel f = [](const fp::BitVector& z) {
    return 1.0 * z.test(0) + 2.0 * z.test(1) + 3.0 * (z.test(0) && z.test(1));
  };
  fp::BitVector x(8), b(8);
  x.set(0);
  x.set(1);
  const auto rep = shapley_mc(f, x, b, 4000, 2);
  ASSERT_EQ(rep.features.size(), 2u);
  EXPECT_NEAR(rep.phi[0], 2.5, 4 * rep.stderr_[0] + 1e-12);
  EXPECT_NEAR(rep.phi[1], 3.5, 4 * rep.stderr_[1] + 1e-12);
  EXPECT_NEAR(rep.efficiency_residual(), 0.0, 1e-9);
  const auto again = shapley_mc(f, x, b, 4000, 2);
  EXPECT_EQ(again.phi, rep.phi);
}

TEST(Shapley, RejectsTooFewSamples) {
  FingerprintModel f = [](const fp::BitVector&) { return 0.0; };
  EXPECT_THROW(shapley_mc(f, fp::BitVector(4), fp::BitVector(4), 10, 0), Error);
  EXPECT_THROW(shapley_mc(f, fp::BitVector(4), fp::BitVector(8), 100, 0), Error);
}
