#include "cb2/model/input.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cb2/model/config.hpp"

namespace cb2::model {

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_[0] != kUnknown) throw ModelError("vocabulary must start with <unk>");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ModelError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocab Vocab::build(const std::vector<chem::MolGraph>& mols) {
  std::set<std::string> seen;
  for (const auto& g : mols) {
    for (const auto& t : g.tokens) seen.insert(t.text);
  }
  seen.erase(kUnknown);
  std::vector<std::string> tokens{kUnknown};
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return Vocab(std::move(tokens));
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

std::string Vocab::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i) out += ' ';
    out += tokens_[i];
  }
  return out;
}

Vocab Vocab::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  std::string t;
  while (in >> t) tokens.push_back(t);
  return Vocab(std::move(tokens));
}

int element_bucket(int z) {
  switch (z) {
    case 6: return 0;
    case 7: return 1;
    case 8: return 2;
    case 16: return 3;
    case 9: return 4;
    case 17: return 5;
    case 35: return 6;
    case 53: return 7;
    case 15: return 8;
    case 5: return 9;
    default: return 10;
  }
}

tensor::SparseMatrix normalized_adjacency(const chem::MolGraph& g) {
  const std::size_t n = g.atoms.size();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.adjacency[i].size() + 1));
  }
  tensor::SparseMatrix s;
  s.cols = n;
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    row.emplace_back(i, inv_sqrt[i] * inv_sqrt[i]);
    for (const auto& nb : g.adjacency[i]) {
      const auto j = static_cast<std::size_t>(nb.atom);
      row.emplace_back(j, inv_sqrt[i] * inv_sqrt[j]);
    }
    std::sort(row.begin(), row.end());
    s.add_row(row);
  }
  return s;
}

MoleculeInput prepare(const chem::MolGraph& g, const Vocab& vocab) {
  if (g.atoms.empty()) throw ModelError("EmptyGraph: molecule has no atoms");
  MoleculeInput m;
  m.token_ids.reserve(g.tokens.size());
  for (std::size_t i = 0; i < g.tokens.size(); ++i) {
    const auto& t = g.tokens[i];
    m.token_ids.push_back(vocab.id(t.text));
    m.token_text.push_back(t.text);
    m.token_span.emplace_back(t.begin, t.end);
  }
  m.token_to_atom = g.token_to_atom;
  for (const auto& a : g.atoms) {
    m.atom_element.push_back(element_bucket(a.element));
    m.atom_aromatic.push_back(a.aromatic ? 1 : 0);
    m.atom_degree.push_back(std::min(a.degree, kDegreeBuckets - 1));
  }
  m.a_hat = normalized_adjacency(g);
  return m;
}

}  // namespace cb2::model
