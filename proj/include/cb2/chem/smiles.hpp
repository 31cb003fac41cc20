#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cb2/util/error.hpp"

namespace cb2::chem {

enum class ParseErrorKind {
  UnknownCharacter,
  UnterminatedBracket,
  UnmatchedRingClosure,
  UnmatchedBranch,
  ValenceExceeded,
  UnsupportedFeature,
  InvalidBond,
  InvalidAromatic,
  Syntax,
};

std::string_view to_string(ParseErrorKind kind);

class ParseError : public Error {
 public:
  // `where` is a byte offset for lexical errors, a ring number for
  // UnmatchedRingClosure and an atom index for ValenceExceeded.
  ParseError(ParseErrorKind kind, std::size_t where, const std::string& detail);

  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t where() const noexcept { return where_; }

 private:
  ParseErrorKind kind_;
  std::size_t where_;
};

enum class TokenKind { Atom, BracketAtom, Bond, RingClosure, BranchOpen, BranchClose, Dot };

struct SmilesToken {
  TokenKind kind = TokenKind::Atom;
  std::string text;
  std::size_t begin = 0;  // byte offsets into the source, [begin, end)
  std::size_t end = 0;

  // Atom and BracketAtom only. element 0 is the '*' wildcard.
  int element = -1;
  bool aromatic = false;
  std::optional<int> isotope;
  std::optional<int> hcount;
  int charge = 0;
  bool chiral = false;

  int ring_number = -1;  // RingClosure only
};

// Lossless: concatenating token texts reproduces the input.
std::vector<SmilesToken> tokenize(std::string_view smiles);

enum class BondOrder { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

inline int bond_code(BondOrder order) { return static_cast<int>(order); }

struct Atom {
  int element = 6;
  bool aromatic = false;
  int formal_charge = 0;
  std::optional<int> explicit_h;  // bracket atoms only
  int implicit_h = 0;             // organic-subset atoms only
  int degree = 0;
  bool in_ring = false;
  std::optional<int> isotope;

  int total_h() const { return explicit_h.value_or(0) + implicit_h; }
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
  bool ring_bond = false;

  int other(int atom) const { return atom == a ? b : a; }
};

struct Neighbor {
  int atom = 0;
  int bond = 0;
};

struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<std::vector<Neighbor>> adjacency;
  std::vector<SmilesToken> tokens;
  // Same length as tokens; -1 for tokens that are not atoms.
  std::vector<int> token_to_atom;
  std::vector<int> atom_to_token;
  std::string source_smiles;
  std::vector<std::string> warnings;

  std::size_t atom_count() const { return atoms.size(); }
  // Bond index between a and b, or -1.
  int bond_between(int a, int b) const;
};

MolGraph parse(const std::vector<SmilesToken>& tokens);

inline MolGraph parse_smiles(std::string_view smiles) { return parse(tokenize(smiles)); }

// Hydrogen count an unbracketed atom of this element/aromaticity would get
// with the given bonds. Returns nullopt when no allowed valence fits.
std::optional<int> organic_implicit_h(int element, bool aromatic, std::span<const BondOrder> bonds);

bool is_organic_subset(int element);

// Element symbol lookup; returns 0 for unknown symbols.
int element_from_symbol(std::string_view symbol);
std::string_view element_symbol(int atomic_number);

}  // namespace cb2::chem
