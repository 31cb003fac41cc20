#include <gtest/gtest.h>

#include <cmath>

#include "cb2/tensor/gradcheck.hpp"
#include "cb2/util/hash.hpp"
#include "corpus.hpp"
#include "model_fixture.hpp"

using namespace cb2;
using namespace cb2::model;

namespace {

const std::vector<std::string> kMols = {"CCO", "c1ccccc1O", "CC(=O)Nc1ccc(O)cc1", "C1CCNCC1"};

struct Built {
  Vocab vocab;
  std::vector<MoleculeInput> inputs;
};

Built build(const std::vector<std::string>& smiles) {
  Built b;
  const auto gs = test::graphs(smiles);
  b.vocab = Vocab::build(gs);
  for (const auto& g : gs) b.inputs.push_back(prepare(g, b.vocab));
  return b;
}

}  // namespace

TEST(Config, SerializeParseRoundTrip) {
  auto c = test::small_config();
  c.dropout = 0.123456789;
  c.prompt_motifs = {"c1ccccc1", "C(=O)O"};
  EXPECT_EQ(ModelConfig::parse(c.serialize()), c);
  EXPECT_THROW(ModelConfig::parse("d_model=16\nmystery=1\n"), Error);
}

TEST(Config, ValidateRejectsBadShapes) {
  auto c = test::small_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ModelError);
  c = test::small_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ModelError);
  EXPECT_EQ(task_from_string("reg"), Task::Regression);
  EXPECT_EQ(to_string(Task::Classification), "clf");
  EXPECT_THROW(task_from_string("rank"), Error);
}

TEST(Vocab, BuildSortedWithUnknownFirst) {
  const auto v = Vocab::build(test::graphs({"CCO", "c1ccccc1"}));
  EXPECT_EQ(v.tokens().front(), "<unk>");
  EXPECT_TRUE(std::is_sorted(v.tokens().begin() + 1, v.tokens().end()));
  EXPECT_EQ(v.id("Br"), 0);
  EXPECT_GT(v.id("c"), 0);
  EXPECT_EQ(Vocab::parse(v.serialize()), v);
}

TEST(Input, EthaneAdjacencyOracle) {
  // A + I is all ones and every degree is 2, so every entry is 1/2.
  const auto s = normalized_adjacency(chem::parse_smiles("CC"));
  ASSERT_EQ(s.val.size(), 4u);
  for (double v : s.val) EXPECT_NEAR(v, 0.5, 1e-15);
  // Propane: ends have degree 2, the middle 3.
  const auto p = normalized_adjacency(chem::parse_smiles("CCC"));
  EXPECT_NEAR(p.val[1], 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(p.val[3], 1.0 / 3.0, 1e-15);
}

TEST(Input, TokensMapToAtoms) {
  const auto b = build({"CC(=O)[O-]"});
  const auto& m = b.inputs[0];
  EXPECT_EQ(m.token_text, (std::vector<std::string>{"C", "C", "(", "=", "O", ")", "[O-]"}));
  EXPECT_EQ(m.token_to_atom, (std::vector<int>{0, 1, -1, -1, 2, -1, 3}));
  EXPECT_EQ(m.atoms(), 4u);
}

TEST(Prompts, UnitNormDeterministicAndFrozen) {
  const auto p = build_prompts(default_prompt_motifs(), 8, 32, 0);
  for (std::size_t r = 0; r < 8; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 32; ++c) s += p.at(r, c) * p.at(r, c);
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
  }
  EXPECT_EQ(build_prompts(default_prompt_motifs(), 8, 32, 0).values(), p.values());
  EXPECT_NE(build_prompts(default_prompt_motifs(), 8, 32, 1).values(), p.values());
  // More prompts than motifs: repeats still differ.
  const auto q = build_prompts({"c1ccccc1"}, 2, 8, 0);
  EXPECT_NE(std::vector<double>(q.data(), q.data() + 8), std::vector<double>(q.data() + 8, q.data() + 16));

  const auto b = build(kMols);
  CB2former m(test::small_config(), b.vocab, 1);
  EXPECT_FALSE(m.prompts().requires_grad());
  for (const auto& t : m.parameters()) EXPECT_FALSE(t.same(m.prompts()));
}

TEST(Positional, MatchesSinusoidFormula) {
  const auto pe = positional_encoding(20, 8);
  for (std::size_t pos = 0; pos < 20; ++pos) {
    for (int i = 0; i < 4; ++i) {
      const double w = std::pow(10000.0, -2.0 * i / 8.0);
      EXPECT_NEAR(pe.at(pos, 2 * i), std::sin(pos * w), 1e-12);
      EXPECT_NEAR(pe.at(pos, 2 * i + 1), std::cos(pos * w), 1e-12);
    }
  }
}

TEST(Model, ForwardShapesAndBatchIndependence) {
  const auto b = build(kMols);
  CB2former m(test::small_config(), b.vocab, 3);
  std::vector<const MoleculeInput*> batch;
  for (const auto& x : b.inputs) batch.push_back(&x);
  tensor::Tape t(tensor::Mode::Eval, false);
  const auto out = m.forward(t, batch, Task::Regression, 0);
  ASSERT_EQ(out.rows(), 4u);
  ASSERT_EQ(out.cols(), 1u);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const MoleculeInput* one[] = {batch[i]};
    EXPECT_NEAR(m.forward(t, one, Task::Regression, 0).item(), out.at(i, 0), 1e-12);
  }
  const auto enc = m.encode(t, b.inputs[2]);
  EXPECT_EQ(enc.rows(), 2u + b.inputs[2].length());
  EXPECT_EQ(enc.cols(), 16u);
}

TEST(Model, PredictAppliesSigmoidForClassification) {
  const auto b = build(kMols);
  CB2former m(test::small_config(), b.vocab, 3);
  const auto raw = m.predict(b.inputs, Task::Classification);
  for (double p : raw) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Model, AttentionRowsAreDistributions) {
  const auto corpus = test::load_corpus();
  std::vector<std::string> smi;
  for (std::size_t i = 0; i < corpus.size(); i += 20) smi.push_back(corpus[i].smiles);
  const auto b = build(smi);
  CB2former m(test::small_config(), b.vocab, 4);
  tensor::Tape t(tensor::Mode::Eval, false);
  for (const auto& in : b.inputs) {
    AttentionRecord rec;
    m.encode(t, in, 0, &rec);
    ASSERT_EQ(rec.layers.size(), 2u);
    ASSERT_EQ(rec.size(), 2u + in.length());
    EXPECT_EQ(rec.tokens[0], "<prompt0>");
    for (const auto& layer : rec.layers) {
      ASSERT_EQ(layer.size(), 2u);
      for (std::size_t h = 0; h < 2; ++h) {
        for (std::size_t r = 0; r < rec.size(); ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < rec.size(); ++c) {
            EXPECT_GE(layer[h][r * rec.size() + c], 0.0);
            s += layer[h][r * rec.size() + c];
          }
          EXPECT_NEAR(s, 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(Model, FullGradientCheckSmallConfig) {
  const auto b = build({"CC(=O)Nc1ccc(O)cc1", "C1CCNCC1"});
  auto cfg = test::small_config();
  cfg.dropout = 0.0;
  CB2former m(cfg, b.vocab, 5);
  // Random head weights so no gradient is structurally zero.
  const MoleculeInput* batch[] = {&b.inputs[0], &b.inputs[1]};
  tensor::Tensor target(2, 1, std::vector<double>{6.5, 7.25});
  const auto rep = tensor::grad_check(
      [&](tensor::Tape& t) { return tensor::mse_loss(t, m.forward(t, batch, Task::Regression, 0), target); },
      m.parameters());
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
  EXPECT_GT(rep.checked, 1000u);
}

TEST(Model, StateRoundTripReproducesOutputs) {
  const auto b = build(kMols);
  CB2former a(test::small_config(), b.vocab, 6);
  CB2former c(test::small_config(), b.vocab, 7);
  EXPECT_NE(a.predict(b.inputs, Task::Regression), c.predict(b.inputs, Task::Regression));
  c.load_state(a.state());
  EXPECT_EQ(a.predict(b.inputs, Task::Regression), c.predict(b.inputs, Task::Regression));
}

TEST(Model, SameSeedSameWeights) {
  const auto b = build(kMols);
  CB2former a(test::small_config(), b.vocab, 8);
  CB2former c(test::small_config(), b.vocab, 8);
  const auto pa = a.parameters();
  const auto pc = c.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].values(), pc[i].values());
}

TEST(Model, ErrorsOnOverlongAndEmpty) {
  const auto b = build({"CCCCCCCCCC"});
  auto cfg = test::small_config();
  cfg.max_len = 8;
  CB2former m(cfg, b.vocab, 9);
  tensor::Tape t(tensor::Mode::Eval, false);
  const MoleculeInput* one[] = {&b.inputs[0]};
  EXPECT_THROW(m.forward(t, one, Task::Regression, 0), ModelError);
  EXPECT_THROW(m.param("nope"), ModelError);
}
