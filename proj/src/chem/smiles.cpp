#include "cb2/chem/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <string>

namespace cb2::chem {

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::UnknownCharacter: return "UnknownCharacter";
    case ParseErrorKind::UnterminatedBracket: return "UnterminatedBracket";
    case ParseErrorKind::UnmatchedRingClosure: return "UnmatchedRingClosure";
    case ParseErrorKind::UnmatchedBranch: return "UnmatchedBranch";
    case ParseErrorKind::ValenceExceeded: return "ValenceExceeded";
    case ParseErrorKind::UnsupportedFeature: return "UnsupportedFeature";
    case ParseErrorKind::InvalidBond: return "InvalidBond";
    case ParseErrorKind::InvalidAromatic: return "InvalidAromatic";
    case ParseErrorKind::Syntax: return "Syntax";
  }
  return "Unknown";
}

ParseError::ParseError(ParseErrorKind kind, std::size_t where, const std::string& detail)
    : Error(ErrorCategory::Data,
            std::string(to_string(kind)) + "(" + std::to_string(where) + "): " + detail),
      kind_(kind),
      where_(where) {}

int MolGraph::bond_between(int a, int b) const {
  for (const auto& n : adjacency[static_cast<std::size_t>(a)]) {
    if (n.atom == b) return n.bond;
  }
  return -1;
}

namespace {

[[noreturn]] void fail(ParseErrorKind kind, std::size_t where, const std::string& detail) {
  throw ParseError(kind, where, detail);
}

bool aromatic_capable(int element) {
  switch (element) {
    case 5: case 6: case 7: case 8: case 15: case 16: case 33: case 34:
      return true;
    default:
      return false;
  }
}

std::vector<int> allowed_valences(int element) {
  switch (element) {
    case 5: return {3};
    case 6: return {4};
    case 7: return {3};
    case 8: return {2};
    case 15: return {3, 5};
    case 16: return {2, 4, 6};
    case 9: case 17: case 35: case 53: return {1};
    default: return {};
  }
}

// Reads one bracket atom; `open` is the offset of its '['.
SmilesToken read_bracket_atom(std::string_view s, std::size_t open) {
  const std::size_t close = s.find(']', open + 1);
  if (close == std::string_view::npos) {
    fail(ParseErrorKind::UnterminatedBracket, open, "no closing ']'");
  }
  const std::string_view body = s.substr(open + 1, close - open - 1);
  if (body.find('[') != std::string_view::npos) {
    fail(ParseErrorKind::UnterminatedBracket, open, "nested '['");
  }
  SmilesToken tok;
  tok.kind = TokenKind::BracketAtom;
  tok.begin = open;
  tok.end = close + 1;
  tok.text = std::string(s.substr(open, close + 1 - open));

  std::size_t i = 0;
  auto at = [&](std::size_t k) -> char { return k < body.size() ? body[k] : '\0'; };
  auto bad = [&](const char* what) {
    fail(ParseErrorKind::UnknownCharacter, open + 1 + i, what);
  };

  if (std::isdigit(static_cast<unsigned char>(at(i)))) {
    int iso = 0;
    while (std::isdigit(static_cast<unsigned char>(at(i)))) {
      iso = iso * 10 + (at(i) - '0');
      if (iso > 999) bad("isotope out of range");
      ++i;
    }
    tok.isotope = iso;
  }

  const char c0 = at(i);
  if (c0 == '*') {
    tok.element = 0;
    ++i;
  } else if (std::islower(static_cast<unsigned char>(c0))) {
    // Aromatic symbols: se, as first, then single letters.
    const std::string two{c0, at(i + 1)};
    if (two == "se" || two == "as") {
      tok.element = two == "se" ? 34 : 33;
      i += 2;
    } else if (std::string_view("bcnops").find(c0) != std::string_view::npos) {
      tok.element = element_from_symbol(std::string(1, static_cast<char>(std::toupper(c0))));
      ++i;
    } else {
      bad("unknown aromatic symbol");
    }
    tok.aromatic = true;
  } else if (std::isupper(static_cast<unsigned char>(c0))) {
    int z = 0;
    if (std::islower(static_cast<unsigned char>(at(i + 1)))) {
      z = element_from_symbol(std::string{c0, at(i + 1)});
      if (z != 0) i += 2;
    }
    if (z == 0) {
      z = element_from_symbol(std::string(1, c0));
      if (z == 0) bad("unknown element symbol");
      ++i;
    }
    tok.element = z;
  } else {
    bad("expected element symbol");
  }

  if (at(i) == '@') {
    tok.chiral = true;
    while (at(i) == '@') ++i;
    // @TH1, @AL2, @SP3 ... forms: two capitals followed by digits.
    if (std::isupper(static_cast<unsigned char>(at(i))) && at(i) != 'H') {
      i += 2;
      while (std::isdigit(static_cast<unsigned char>(at(i)))) ++i;
    }
  }

  if (at(i) == 'H') {
    ++i;
    int h = 1;
    if (std::isdigit(static_cast<unsigned char>(at(i)))) {
      h = at(i) - '0';
      ++i;
    }
    tok.hcount = h;
  }

  if (at(i) == '+' || at(i) == '-') {
    const char sign = at(i);
    const int unit = sign == '+' ? 1 : -1;
    ++i;
    int magnitude = 1;
    if (std::isdigit(static_cast<unsigned char>(at(i)))) {
      magnitude = 0;
      while (std::isdigit(static_cast<unsigned char>(at(i)))) {
        magnitude = magnitude * 10 + (at(i) - '0');
        if (magnitude > 15) bad("charge out of range");
        ++i;
      }
    } else {
      while (at(i) == sign) {
        ++magnitude;
        ++i;
      }
    }
    tok.charge = unit * magnitude;
  }

  if (at(i) == ':') {
    ++i;
    if (!std::isdigit(static_cast<unsigned char>(at(i)))) bad("atom class needs digits");
    while (std::isdigit(static_cast<unsigned char>(at(i)))) ++i;
  }

  if (i != body.size()) bad("unexpected character in bracket atom");
  if (tok.aromatic && !aromatic_capable(tok.element)) {
    fail(ParseErrorKind::InvalidAromatic, open, "element cannot be aromatic");
  }
  return tok;
}

}  // namespace

std::vector<SmilesToken> tokenize(std::string_view s) {
  std::vector<SmilesToken> out;
  std::size_t i = 0;
  auto simple = [&](TokenKind kind, std::size_t len) {
    SmilesToken t;
    t.kind = kind;
    t.begin = i;
    t.end = i + len;
    t.text = std::string(s.substr(i, len));
    i += len;
    return t;
  };

  while (i < s.size()) {
    const char c = s[i];
    const char next = i + 1 < s.size() ? s[i + 1] : '\0';
    if (c == '[') {
      auto t = read_bracket_atom(s, i);
      i = t.end;
      out.push_back(std::move(t));
    } else if ((c == 'C' && next == 'l') || (c == 'B' && next == 'r')) {
      auto t = simple(TokenKind::Atom, 2);
      t.element = c == 'C' ? 17 : 35;
      out.push_back(std::move(t));
    } else if (std::string_view("BCNOPSFI").find(c) != std::string_view::npos) {
      auto t = simple(TokenKind::Atom, 1);
      t.element = element_from_symbol(std::string(1, c));
      out.push_back(std::move(t));
    } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
      auto t = simple(TokenKind::Atom, 1);
      t.element = element_from_symbol(std::string(1, static_cast<char>(std::toupper(c))));
      t.aromatic = true;
      out.push_back(std::move(t));
    } else if (c == '*') {
      auto t = simple(TokenKind::Atom, 1);
      t.element = 0;
      out.push_back(std::move(t));
    } else if (std::string_view("-=#$:/\\").find(c) != std::string_view::npos) {
      out.push_back(simple(TokenKind::Bond, 1));
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      auto t = simple(TokenKind::RingClosure, 1);
      t.ring_number = c - '0';
      out.push_back(std::move(t));
    } else if (c == '%') {
      if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(next)) ||
          !std::isdigit(static_cast<unsigned char>(s[i + 2]))) {
        fail(ParseErrorKind::UnknownCharacter, i, "'%' must be followed by two digits");
      }
      auto t = simple(TokenKind::RingClosure, 3);
      t.ring_number = (t.text[1] - '0') * 10 + (t.text[2] - '0');
      out.push_back(std::move(t));
    } else if (c == '(') {
      out.push_back(simple(TokenKind::BranchOpen, 1));
    } else if (c == ')') {
      out.push_back(simple(TokenKind::BranchClose, 1));
    } else if (c == '.') {
      out.push_back(simple(TokenKind::Dot, 1));
    } else if (c == '>') {
      fail(ParseErrorKind::UnsupportedFeature, i, "reaction SMILES are not supported");
    } else {
      fail(ParseErrorKind::UnknownCharacter, i, "unexpected character");
    }
  }
  return out;
}

std::optional<int> organic_implicit_h(int element, bool aromatic, std::span<const BondOrder> bonds) {
  int sum = 0;
  for (auto order : bonds) sum += order == BondOrder::Aromatic ? 1 : static_cast<int>(order);
  for (int v : allowed_valences(element)) {
    if (v >= sum) {
      // An aromatic atom spends one valence unit on the delocalized system.
      return std::max(0, v - sum - (aromatic ? 1 : 0));
    }
  }
  return std::nullopt;
}

namespace {

struct PendingBond {
  char symbol = '\0';  // '\0' = none written
  std::size_t pos = 0;
};

struct OpenRing {
  int atom = 0;
  PendingBond bond;
  std::size_t pos = 0;
};

struct BondDraft {
  int a;
  int b;
  BondOrder order;
  bool implicit_aromatic;
};

BondOrder order_from_symbol(char sym, std::size_t pos, std::vector<std::string>& warnings) {
  switch (sym) {
    case '-': return BondOrder::Single;
    case '=': return BondOrder::Double;
    case '#': return BondOrder::Triple;
    case ':': return BondOrder::Aromatic;
    case '/':
    case '\\':
      warnings.push_back("directional bond at " + std::to_string(pos) + " treated as single");
      return BondOrder::Single;
    case '$':
      fail(ParseErrorKind::UnsupportedFeature, pos, "quadruple bonds are not supported");
    default:
      fail(ParseErrorKind::Syntax, pos, "unknown bond symbol");
  }
}

// Marks every non-bridge edge as a ring bond (iterative Tarjan low-link).
void mark_ring_bonds(MolGraph& g) {
  const std::size_t n = g.atoms.size();
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    std::vector<Frame> stack{{static_cast<int>(root), -1, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto& adj = g.adjacency[static_cast<std::size_t>(f.atom)];
      if (f.next < adj.size()) {
        const Neighbor nb = adj[f.next++];
        if (nb.bond == f.parent_bond) continue;
        const auto v = static_cast<std::size_t>(nb.atom);
        if (disc[v] < 0) {
          disc[v] = low[v] = timer++;
          stack.push_back({nb.atom, nb.bond, 0});
        } else {
          // back edge: always on a cycle
          g.bonds[static_cast<std::size_t>(nb.bond)].ring_bond = true;
          low[static_cast<std::size_t>(f.atom)] =
              std::min(low[static_cast<std::size_t>(f.atom)], disc[v]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const auto u = static_cast<std::size_t>(stack.back().atom);
          const auto w = static_cast<std::size_t>(done.atom);
          low[u] = std::min(low[u], low[w]);
          if (low[w] <= disc[u]) {
            g.bonds[static_cast<std::size_t>(done.parent_bond)].ring_bond = true;
          }
        }
      }
    }
  }
  for (const auto& b : g.bonds) {
    if (b.ring_bond) {
      g.atoms[static_cast<std::size_t>(b.a)].in_ring = true;
      g.atoms[static_cast<std::size_t>(b.b)].in_ring = true;
    }
  }
}

}  // namespace

MolGraph parse(const std::vector<SmilesToken>& tokens) {
  MolGraph g;
  g.tokens = tokens;
  g.token_to_atom.assign(tokens.size(), -1);
  for (const auto& t : tokens) g.source_smiles += t.text;
  if (tokens.empty()) fail(ParseErrorKind::Syntax, 0, "empty SMILES");

  std::vector<BondDraft> drafts;
  std::vector<int> branch_stack;
  std::map<int, OpenRing> open_rings;
  int prev = -1;
  PendingBond pending;
  bool branch_just_opened = false;

  auto add_bond = [&](int a, int b, PendingBond sym, std::size_t pos) {
    if (a == b) fail(ParseErrorKind::InvalidBond, pos, "atom bonded to itself");
    for (const auto& d : drafts) {
      if ((d.a == a && d.b == b) || (d.a == b && d.b == a)) {
        fail(ParseErrorKind::InvalidBond, pos, "duplicate bond");
      }
    }
    const bool both_aromatic = g.atoms[static_cast<std::size_t>(a)].aromatic &&
                               g.atoms[static_cast<std::size_t>(b)].aromatic;
    BondDraft d{a, b, BondOrder::Single, false};
    if (sym.symbol == '\0') {
      if (both_aromatic) {
        d.order = BondOrder::Aromatic;
        d.implicit_aromatic = true;
      }
    } else {
      d.order = order_from_symbol(sym.symbol, sym.pos, g.warnings);
      if (d.order == BondOrder::Aromatic && !both_aromatic) {
        fail(ParseErrorKind::InvalidBond, sym.pos, "aromatic bond between non-aromatic atoms");
      }
    }
    drafts.push_back(d);
  };

  for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
    const SmilesToken& t = tokens[ti];
    switch (t.kind) {
      case TokenKind::Atom:
      case TokenKind::BracketAtom: {
        if (t.element == 0) fail(ParseErrorKind::UnsupportedFeature, t.begin, "wildcard atom");
        if (t.element < 0) fail(ParseErrorKind::Syntax, t.begin, "atom token without element");
        Atom a;
        a.element = t.element;
        a.aromatic = t.aromatic;
        if (t.kind == TokenKind::BracketAtom) {
          a.formal_charge = t.charge;
          a.isotope = t.isotope;
          a.explicit_h = t.hcount.value_or(0);
          if (t.chiral) {
            g.warnings.push_back("chirality at " + std::to_string(t.begin) + " ignored");
          }
        }
        const int idx = static_cast<int>(g.atoms.size());
        g.atoms.push_back(a);
        g.token_to_atom[ti] = idx;
        g.atom_to_token.push_back(static_cast<int>(ti));
        if (prev >= 0) {
          add_bond(prev, idx, pending, t.begin);
        } else if (pending.symbol != '\0') {
          fail(ParseErrorKind::Syntax, pending.pos, "bond without a preceding atom");
        }
        pending = {};
        prev = idx;
        branch_just_opened = false;
        break;
      }
      case TokenKind::Bond:
        if (prev < 0) fail(ParseErrorKind::Syntax, t.begin, "bond without a preceding atom");
        if (pending.symbol != '\0') fail(ParseErrorKind::Syntax, t.begin, "two consecutive bonds");
        pending = {t.text[0], t.begin};
        break;
      case TokenKind::RingClosure: {
        if (prev < 0 || branch_just_opened) {
          fail(ParseErrorKind::Syntax, t.begin, "ring closure without an atom");
        }
        auto it = open_rings.find(t.ring_number);
        if (it == open_rings.end()) {
          open_rings[t.ring_number] = OpenRing{prev, pending, t.begin};
        } else {
          PendingBond sym = pending;
          const PendingBond& opener = it->second.bond;
          if (sym.symbol == '\0') {
            sym = opener;
          } else if (opener.symbol != '\0' && opener.symbol != sym.symbol) {
            fail(ParseErrorKind::InvalidBond, t.begin, "conflicting ring-closure bond symbols");
          }
          add_bond(it->second.atom, prev, sym, t.begin);
          open_rings.erase(it);
        }
        pending = {};
        break;
      }
      case TokenKind::BranchOpen:
        if (prev < 0) fail(ParseErrorKind::UnmatchedBranch, t.begin, "branch without an atom");
        if (pending.symbol != '\0') fail(ParseErrorKind::Syntax, t.begin, "bond before '('");
        branch_stack.push_back(prev);
        branch_just_opened = true;
        break;
      case TokenKind::BranchClose:
        if (branch_stack.empty()) fail(ParseErrorKind::UnmatchedBranch, t.begin, "unmatched ')'");
        if (pending.symbol != '\0') fail(ParseErrorKind::Syntax, t.begin, "dangling bond");
        if (branch_just_opened) fail(ParseErrorKind::Syntax, t.begin, "empty branch");
        prev = branch_stack.back();
        branch_stack.pop_back();
        break;
      case TokenKind::Dot:
        if (pending.symbol != '\0') fail(ParseErrorKind::Syntax, t.begin, "dangling bond");
        if (!branch_stack.empty()) fail(ParseErrorKind::UnmatchedBranch, t.begin, "'.' inside branch");
        if (prev < 0) fail(ParseErrorKind::Syntax, t.begin, "empty component");
        prev = -1;
        break;
    }
  }
  if (pending.symbol != '\0') fail(ParseErrorKind::Syntax, pending.pos, "dangling bond");
  if (!branch_stack.empty()) {
    fail(ParseErrorKind::UnmatchedBranch, tokens.back().end, "unclosed '('");
  }
  if (!open_rings.empty()) {
    const auto& [num, ring] = *open_rings.begin();
    fail(ParseErrorKind::UnmatchedRingClosure, static_cast<std::size_t>(num),
         "ring bond " + std::to_string(num) + " opened at " + std::to_string(ring.pos) +
             " is never closed");
  }
  if (prev < 0) fail(ParseErrorKind::Syntax, tokens.back().begin, "trailing '.'");

  g.adjacency.assign(g.atoms.size(), {});
  for (const auto& d : drafts) {
    const int bi = static_cast<int>(g.bonds.size());
    g.bonds.push_back(Bond{d.a, d.b, d.order, false});
    g.adjacency[static_cast<std::size_t>(d.a)].push_back({d.b, bi});
    g.adjacency[static_cast<std::size_t>(d.b)].push_back({d.a, bi});
  }
  mark_ring_bonds(g);

  // An unwritten bond between aromatic atoms is aromatic only inside a ring
  // (biphenyl-style links are single).
  for (std::size_t bi = 0; bi < g.bonds.size(); ++bi) {
    if (drafts[bi].implicit_aromatic && !g.bonds[bi].ring_bond) {
      g.bonds[bi].order = BondOrder::Single;
    }
  }

  for (std::size_t ai = 0; ai < g.atoms.size(); ++ai) {
    Atom& a = g.atoms[ai];
    a.degree = static_cast<int>(g.adjacency[ai].size());
    if (a.aromatic && !a.in_ring) {
      fail(ParseErrorKind::InvalidAromatic, tokens[static_cast<std::size_t>(g.atom_to_token[ai])].begin,
           "aromatic atom outside a ring");
    }
    if (a.explicit_h) continue;
    std::vector<BondOrder> orders;
    for (const auto& nb : g.adjacency[ai]) orders.push_back(g.bonds[static_cast<std::size_t>(nb.bond)].order);
    auto h = organic_implicit_h(a.element, a.aromatic, orders);
    if (!h) fail(ParseErrorKind::ValenceExceeded, ai, "bond order sum exceeds allowed valence");
    a.implicit_h = *h;
  }
  return g;
}

}  // namespace cb2::chem
