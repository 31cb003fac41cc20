#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cb2/chem/smiles.hpp"
#include "cb2/dataio.hpp"

namespace cb2::synth {

struct SyntheticOptions {
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  double noise_sd = 0.1;
  double aromatic_effect = 2.0;
  double carbonyl_effect = 1.0;
  double base = 5.0;
};

// Graph-level oracles for the label generator.
bool has_aromatic_ring(const chem::MolGraph& g);
bool has_carbonyl(const chem::MolGraph& g);  // C=O double bond

// Random molecules assembled from chain, ring and carbonyl fragments, unique
// by canonical SMILES. pActivity = base + aromatic_effect*[aromatic ring]
// + carbonyl_effect*[C=O] + N(0, noise_sd); value is reported in nM.
std::vector<data::ActivityRecord> generate(const SyntheticOptions& options);

}  // namespace cb2::synth
