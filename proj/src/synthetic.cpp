#include "cb2/synthetic.hpp"

#include <array>
#include <cmath>
#include <string>
#include <unordered_set>

#include "cb2/chem/canon.hpp"
#include "cb2/util/rng.hpp"

namespace cb2::synth {

namespace {

constexpr std::array<const char*, 17> kChain = {
    "C", "CC", "CCC", "C(C)", "C(C)C", "N", "O", "C(F)", "C(Cl)",
    "CN", "CO", "C(N)", "S", "C1CCCCC1", "C1CC1", "C=C", "C#C"};
constexpr std::array<const char*, 7> kAromatic = {
    "c1ccccc1", "c1ccncc1", "c1ccc(F)cc1", "c1ccc(Cl)cc1", "c1ccc(C)cc1", "c1ccsc1", "c1ccoc1"};
constexpr std::array<const char*, 5> kCarbonyl = {"C(=O)", "C(=O)N", "C(=O)O", "C(=O)C", "NC(=O)"};

// Every piece bonds through its first and last written atom, so plain
// concatenation always gives one connected molecule.
std::string assemble(Rng& rng) {
  const bool aromatic = rng.bernoulli(0.5);
  const bool carbonyl = rng.bernoulli(0.5);
  std::vector<std::string> pieces;
  const std::size_t n_chain = 1 + rng.below(4);
  for (std::size_t i = 0; i < n_chain; ++i) pieces.emplace_back(kChain[rng.below(kChain.size())]);
  if (aromatic) {
    const std::size_t n = 1 + (rng.bernoulli(0.25) ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) pieces.emplace_back(kAromatic[rng.below(kAromatic.size())]);
  }
  if (carbonyl) pieces.emplace_back(kCarbonyl[rng.below(kCarbonyl.size())]);
  rng.shuffle(pieces);
  std::string s;
  for (const auto& p : pieces) s += p;
  return s;
}

}  // namespace

bool has_aromatic_ring(const chem::MolGraph& g) {
  for (const auto& a : g.atoms) {
    if (a.aromatic && a.in_ring) return true;
  }
  return false;
}

bool has_carbonyl(const chem::MolGraph& g) {
  for (const auto& b : g.bonds) {
    if (b.order != chem::BondOrder::Double) continue;
    const int ea = g.atoms[static_cast<std::size_t>(b.a)].element;
    const int eb = g.atoms[static_cast<std::size_t>(b.b)].element;
    if ((ea == 6 && eb == 8) || (ea == 8 && eb == 6)) return true;
  }
  return false;
}

std::vector<data::ActivityRecord> generate(const SyntheticOptions& options) {
  Rng rng(options.seed);
  std::vector<data::ActivityRecord> out;
  std::unordered_set<std::string> seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = options.n * 200 + 1000;
  while (out.size() < options.n && attempts++ < max_attempts) {
    const std::string smi = assemble(rng);
    chem::MolGraph g;
    try {
      g = chem::parse_smiles(smi);
    } catch (const chem::ParseError&) {
      continue;
    }
    std::string canon = chem::canonicalize(g);
    if (!seen.insert(canon).second) continue;
    const double p = options.base + options.aromatic_effect * (has_aromatic_ring(g) ? 1.0 : 0.0) +
                     options.carbonyl_effect * (has_carbonyl(g) ? 1.0 : 0.0) +
                     rng.normal(0.0, options.noise_sd);
    data::ActivityRecord r;
    r.compound_id = "SYN" + std::to_string(out.size() + 1);
    r.smiles = std::move(canon);
    r.measure_type = data::MeasureType::IC50;
    r.value = std::pow(10.0, 9.0 - p);
    r.units = data::Units::nM;
    r.pic50 = data::to_pic50(r.value, r.units);
    r.active = r.pic50 >= data::kDefaultActiveThreshold;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cb2::synth
