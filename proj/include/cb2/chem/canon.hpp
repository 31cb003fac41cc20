#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cb2/chem/smiles.hpp"
#include "cb2/util/rng.hpp"

namespace cb2::chem {

// Per-atom invariant hashes after iterated neighborhood refinement. Two
// atoms related by an automorphism always get the same value.
std::vector<std::uint64_t> refined_invariants(const MolGraph& g);

// Order-independent summary of the graph; equal for isomorphic graphs.
std::uint64_t graph_signature(const MolGraph& g);

// Canonical atom ranks, a permutation of 0..n-1.
std::vector<int> canonical_rank(const MolGraph& g);

// Writes SMILES by depth-first traversal. Each component starts at its
// lowest-priority atom; neighbors are visited in ascending priority.
std::string write_smiles(const MolGraph& g, const std::vector<int>& priority);

std::string canonicalize(const MolGraph& g);

inline std::string canonical_smiles(std::string_view smiles) {
  return canonicalize(parse_smiles(smiles));
}

// A valid alternative spelling from a random root and neighbor order.
std::string random_smiles(const MolGraph& g, Rng& rng);

}  // namespace cb2::chem
