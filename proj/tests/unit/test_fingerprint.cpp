#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cb2/chem/canon.hpp"
#include "cb2/fingerprint.hpp"
#include "cb2/util/rng.hpp"
#include "corpus.hpp"

using namespace cb2;
using namespace cb2::fp;

namespace {

const FpKind kKinds[] = {FpKind::Morgan, FpKind::AtomPair, FpKind::Torsion, FpKind::Path};

double set_tanimoto(const BitVector& a, const BitVector& b) {
  const auto x = a.on_bits();
  const auto y = b.on_bits();
  std::vector<std::size_t> inter, uni;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(inter));
  std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(uni));
  return uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

}  // namespace

TEST(BitVector, SetResetCountHex) {
  BitVector v(130);
  v.set(0);
  v.set(64);
  v.set(129);
  EXPECT_EQ(v.count(), 3u);
  v.reset(64);
  EXPECT_FALSE(v.test(64));
  EXPECT_EQ(v.on_bits(), (std::vector<std::size_t>{0, 129}));
  EXPECT_EQ(BitVector::from_hex(v.to_hex(), 130), v);
}

TEST(Fingerprint, LengthsAndParams) {
  const auto g = chem::parse_smiles("CCOc1ccccc1");
  for (auto k : kKinds) {
    const auto f = compute(k, g, 1024);
    EXPECT_EQ(f.length(), 1024u);
    EXPECT_EQ(f.kind, k);
    EXPECT_EQ(f.params.at("nbits"), "1024");
    EXPECT_GT(f.bits.count(), 0u) << to_string(k);
  }
  EXPECT_THROW(morgan_fp(g, 2, 1000), FingerprintError);
}

TEST(Fingerprint, KindNamesRoundTrip) {
  for (auto k : kKinds) EXPECT_EQ(fp_kind_from_string(to_string(k)), k);
  EXPECT_THROW(fp_kind_from_string("avalon"), FingerprintError);
}

TEST(Fingerprint, MorganRadiusZeroCountsAtomTypes) {
  // Ethanol has three distinct heavy-atom environments at radius 0; ethane one.
  const auto ethane = morgan_environments(chem::parse_smiles("CC"), 0);
  EXPECT_EQ(std::set<std::uint64_t>(ethane.begin(), ethane.end()).size(), 1u);
  const auto env = morgan_environments(chem::parse_smiles("CCO"), 0);
  EXPECT_EQ(std::set<std::uint64_t>(env.begin(), env.end()).size(), 3u);
}

TEST(Fingerprint, MorganGrowsWithRadius) {
  const auto g = chem::parse_smiles("CC(C)Cc1ccc(C(C)C(=O)O)cc1");
  std::size_t prev = 0;
  for (int r = 0; r <= 3; ++r) {
    const auto n = morgan_fp(g, r).bits.count();
    EXPECT_GE(n, prev);
    prev = n;
  }
}

TEST(Fingerprint, BfsDistancesOnChain) {
  const auto d = bfs_distances(chem::parse_smiles("CCCCO"), 0);
  EXPECT_EQ(d, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Fingerprint, TorsionPathsOfButane) {
  // n-butane has exactly one 4-atom path; isobutane none.
  EXPECT_EQ(torsion_paths(chem::parse_smiles("CCCC")).size(), 1u);
  EXPECT_TRUE(torsion_paths(chem::parse_smiles("CC(C)C")).empty());
}

TEST(Fingerprint, TanimotoMatchesSetOracle) {
  const auto corpus = test::load_corpus();
  for (std::size_t i = 0; i + 1 < corpus.size(); i += 7) {
    const auto a = morgan_fp(chem::parse_smiles(corpus[i].smiles));
    const auto b = morgan_fp(chem::parse_smiles(corpus[i + 1].smiles));
    EXPECT_DOUBLE_EQ(tanimoto(a, b), set_tanimoto(a.bits, b.bits));
    EXPECT_DOUBLE_EQ(tanimoto(a, b), tanimoto(b, a));
    EXPECT_EQ(tanimoto(a, a), 1.0);
  }
}

TEST(Fingerprint, TanimotoRejectsMismatch) {
  const auto g = chem::parse_smiles("CCO");
  EXPECT_THROW(tanimoto(morgan_fp(g, 2, 1024), morgan_fp(g, 2, 2048)), FingerprintError);
  EXPECT_THROW(tanimoto(morgan_fp(g), path_fp(g)), FingerprintError);
}

TEST(Fingerprint, ConcatOffsetsParts) {
  const auto g = chem::parse_smiles("c1ccccc1O");
  const std::vector<Fingerprint> parts = {morgan_fp(g, 2, 512), torsion_fp(g, 256)};
  const auto c = concat_fp(parts);
  EXPECT_EQ(c.length(), 768u);
  EXPECT_EQ(c.bits.count(), parts[0].bits.count() + parts[1].bits.count());
  for (auto b : parts[1].bits.on_bits()) EXPECT_TRUE(c.bits.test(512 + b));
  EXPECT_EQ(c.params.at("members"), "morgan+torsion");
  EXPECT_THROW(concat_fp({}), FingerprintError);
}

TEST(Fingerprint, ComputeManyMatchesSingles) {
  const auto corpus = test::load_corpus();
  std::vector<chem::MolGraph> mols;
  for (std::size_t i = 0; i < 40; ++i) mols.push_back(chem::parse_smiles(corpus[i].smiles));
  for (auto k : kKinds) {
    const auto many = compute_many(k, mols);
    for (std::size_t i = 0; i < mols.size(); ++i) EXPECT_EQ(many[i], compute(k, mols[i]));
  }
}

TEST(Fingerprint, SpellingInvariantOnCorpus) {
  Rng rng(11);
  for (const auto& e : test::load_corpus()) {
    const auto g = chem::parse_smiles(e.smiles);
    for (auto k : kKinds) {
      const auto ref = compute(k, g);
      for (int i = 0; i < 2; ++i) {
        const auto other = chem::parse_smiles(chem::random_smiles(g, rng));
        EXPECT_EQ(compute(k, other).bits, ref.bits) << e.name << " " << to_string(k);
      }
    }
  }
}
