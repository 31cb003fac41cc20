#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cb2/chem/smiles.hpp"
#include "cb2/tensor/ops.hpp"

namespace cb2::model {

// Token strings to ids; id 0 is reserved for unknown tokens.
class Vocab {
 public:
  static constexpr const char* kUnknown = "<unk>";

  Vocab() : tokens_{kUnknown} { index_[kUnknown] = 0; }
  explicit Vocab(std::vector<std::string> tokens);

  // Sorted set of every token text in the molecules, after <unk>.
  static Vocab build(const std::vector<chem::MolGraph>& mols);

  int id(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Space-separated token list (tokens never contain spaces).
  std::string serialize() const;
  static Vocab parse(std::string_view text);

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

inline constexpr int kElementBuckets = 11;  // C N O S F Cl Br I P B other
inline constexpr int kDegreeBuckets = 5;    // 0..3, 4+

int element_bucket(int atomic_number);

// Everything the network needs from one molecule.
struct MoleculeInput {
  std::vector<int> token_ids;
  std::vector<std::string> token_text;
  std::vector<std::pair<std::size_t, std::size_t>> token_span;  // byte [begin, end)
  std::vector<int> token_to_atom;  // -1 for non-atom tokens
  std::vector<int> atom_element;   // bucket
  std::vector<int> atom_aromatic;  // 0/1
  std::vector<int> atom_degree;    // bucket
  tensor::SparseMatrix a_hat;      // D^-1/2 (A + I) D^-1/2

  std::size_t length() const { return token_ids.size(); }
  std::size_t atoms() const { return atom_element.size(); }
};

tensor::SparseMatrix normalized_adjacency(const chem::MolGraph& g);

MoleculeInput prepare(const chem::MolGraph& g, const Vocab& vocab);
inline MoleculeInput prepare(std::string_view smiles, const Vocab& vocab) {
  return prepare(chem::parse_smiles(smiles), vocab);
}

}  // namespace cb2::model
