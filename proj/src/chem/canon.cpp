#include "cb2/chem/canon.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <numeric>
#include <set>
#include <tuple>

#include "cb2/util/hash.hpp"

namespace cb2::chem {

namespace {

std::uint64_t initial_invariant(const Atom& a) {
  return Fnv1a()
      .i64(a.element)
      .i64(a.formal_charge)
      .i64(a.degree)
      .i64(a.total_h())
      .i64(a.aromatic)
      .i64(a.in_ring)
      .i64(a.isotope.value_or(-1))
      .value();
}

std::size_t count_distinct(std::vector<std::uint64_t> v) {
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

std::size_t count_distinct(const std::vector<int>& v) {
  return std::set<int>(v.begin(), v.end()).size();
}

// Hash of (own value, sorted (bond code, neighbor value) multiset).
template <typename T>
std::uint64_t neighborhood_hash(const MolGraph& g, std::size_t atom, const std::vector<T>& value) {
  std::vector<std::pair<int, std::uint64_t>> env;
  env.reserve(g.adjacency[atom].size());
  for (const auto& nb : g.adjacency[atom]) {
    env.emplace_back(bond_code(g.bonds[static_cast<std::size_t>(nb.bond)].order),
                     static_cast<std::uint64_t>(value[static_cast<std::size_t>(nb.atom)]));
  }
  std::sort(env.begin(), env.end());
  Fnv1a h;
  h.u64(static_cast<std::uint64_t>(value[atom]));
  for (const auto& [code, v] : env) h.i64(code).u64(v);
  return h.value();
}

// Dense class indices ordered by the given keys.
template <typename Key>
std::vector<int> dense_classes(const std::vector<Key>& keys) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return keys[x] < keys[y]; });
  std::vector<int> cls(keys.size(), 0);
  int c = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && keys[order[i - 1]] < keys[order[i]]) ++c;
    cls[order[i]] = c;
  }
  return cls;
}

// Splits classes by neighborhood until the partition stops changing. The
// old class is the primary sort key, so refinement never reorders classes.
void refine(const MolGraph& g, std::vector<int>& cls) {
  const std::size_t n = cls.size();
  std::size_t classes = count_distinct(cls);
  while (classes < n) {
    std::vector<std::pair<int, std::uint64_t>> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = {cls[i], neighborhood_hash(g, i, cls)};
    auto next = dense_classes(keys);
    const std::size_t next_count = count_distinct(next);
    cls = std::move(next);
    if (next_count == classes) break;
    classes = next_count;
  }
}

std::string digit_text(int d) {
  if (d < 10) return std::string(1, static_cast<char>('0' + d));
  std::string s = "%";
  s += static_cast<char>('0' + d / 10);
  s += static_cast<char>('0' + d % 10);
  return s;
}

std::string atom_text(const MolGraph& g, std::size_t ai) {
  const Atom& a = g.atoms[ai];
  std::vector<BondOrder> orders;
  for (const auto& nb : g.adjacency[ai]) orders.push_back(g.bonds[static_cast<std::size_t>(nb.bond)].order);
  std::string sym(element_symbol(a.element));
  if (a.aromatic) {
    for (auto& ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }

  const bool aromatic_organic = !a.aromatic || std::string_view("bcnops").find(sym) != std::string_view::npos;
  if (is_organic_subset(a.element) && aromatic_organic && a.formal_charge == 0 && !a.isotope) {
    const auto h = organic_implicit_h(a.element, a.aromatic, orders);
    if (h && *h == a.total_h()) return sym;
  }

  std::string s = "[";
  if (a.isotope) s += std::to_string(*a.isotope);
  s += sym;
  const int h = a.total_h();
  if (h > 0) {
    s += 'H';
    if (h > 1) s += std::to_string(h);
  }
  if (a.formal_charge != 0) {
    s += a.formal_charge > 0 ? '+' : '-';
    const int mag = std::abs(a.formal_charge);
    if (mag > 1) s += std::to_string(mag);
  }
  s += ']';
  return s;
}

std::string bond_text(const MolGraph& g, const Bond& b) {
  const bool both_aromatic = g.atoms[static_cast<std::size_t>(b.a)].aromatic &&
                             g.atoms[static_cast<std::size_t>(b.b)].aromatic;
  switch (b.order) {
    case BondOrder::Single: return both_aromatic ? "-" : "";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
    case BondOrder::Aromatic: return b.ring_bond ? "" : ":";
  }
  return "";
}

class Writer {
 public:
  Writer(const MolGraph& g, const std::vector<int>& priority)
      : g_(g),
        priority_(priority),
        visited_(g.atoms.size(), false),
        children_(g.atoms.size()),
        ring_open_(g.atoms.size()),
        ring_close_(g.atoms.size()),
        bond_digit_(g.bonds.size(), 0),
        bond_is_ring_(g.bonds.size(), false) {}

  std::string run() {
    std::vector<std::size_t> order(g_.atoms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return priority_[x] < priority_[y]; });
    std::string out;
    for (std::size_t root : order) {
      if (visited_[root]) continue;
      discover(static_cast<int>(root), -1);
      if (!out.empty()) out += '.';
      emit(static_cast<int>(root), out);
    }
    return out;
  }

 private:
  std::vector<Neighbor> sorted_neighbors(int atom) const {
    auto nbs = g_.adjacency[static_cast<std::size_t>(atom)];
    std::sort(nbs.begin(), nbs.end(), [&](const Neighbor& x, const Neighbor& y) {
      return priority_[static_cast<std::size_t>(x.atom)] < priority_[static_cast<std::size_t>(y.atom)];
    });
    return nbs;
  }

  void discover(int u, int parent_bond) {
    visited_[static_cast<std::size_t>(u)] = true;
    for (const auto& nb : sorted_neighbors(u)) {
      const auto b = static_cast<std::size_t>(nb.bond);
      if (nb.bond == parent_bond || bond_is_ring_[b]) continue;
      if (visited_[static_cast<std::size_t>(nb.atom)]) {
        // Back edge: the earlier-written atom opens the ring.
        bond_is_ring_[b] = true;
        ring_open_[static_cast<std::size_t>(nb.atom)].push_back(nb.bond);
        ring_close_[static_cast<std::size_t>(u)].push_back(nb.bond);
      } else {
        children_[static_cast<std::size_t>(u)].push_back(nb);
        discover(nb.atom, nb.bond);
      }
    }
  }

  int allocate_digit(const std::vector<int>& reserved) {
    for (int d = 1;; ++d) {
      if (in_use_.count(d) == 0 && std::find(reserved.begin(), reserved.end(), d) == reserved.end()) {
        in_use_.insert(d);
        return d;
      }
    }
  }

  void emit(int u, std::string& out) {
    const auto ui = static_cast<std::size_t>(u);
    out += atom_text(g_, ui);
    std::vector<int> closed;
    for (int b : ring_close_[ui]) {
      const int d = bond_digit_[static_cast<std::size_t>(b)];
      out += digit_text(d);
      closed.push_back(d);
    }
    for (int b : ring_open_[ui]) {
      const int d = allocate_digit(closed);
      bond_digit_[static_cast<std::size_t>(b)] = d;
      out += bond_text(g_, g_.bonds[static_cast<std::size_t>(b)]);
      out += digit_text(d);
    }
    for (int d : closed) in_use_.erase(d);

    const auto& kids = children_[ui];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const bool last = i + 1 == kids.size();
      if (!last) out += '(';
      out += bond_text(g_, g_.bonds[static_cast<std::size_t>(kids[i].bond)]);
      emit(kids[i].atom, out);
      if (!last) out += ')';
    }
  }

  const MolGraph& g_;
  const std::vector<int>& priority_;
  std::vector<bool> visited_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<std::vector<int>> ring_open_;
  std::vector<std::vector<int>> ring_close_;
  std::vector<int> bond_digit_;
  std::vector<bool> bond_is_ring_;
  std::set<int> in_use_;
};

}  // namespace

std::vector<std::uint64_t> refined_invariants(const MolGraph& g) {
  const std::size_t n = g.atoms.size();
  std::vector<std::uint64_t> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = initial_invariant(g.atoms[i]);
  std::size_t classes = count_distinct(h);
  for (std::size_t iter = 0; iter < n; ++iter) {
    std::vector<std::uint64_t> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = neighborhood_hash(g, i, h);
    h = std::move(next);
    const std::size_t c = count_distinct(h);
    if (c == classes) break;
    classes = c;
  }
  return h;
}

std::uint64_t graph_signature(const MolGraph& g) {
  auto h = refined_invariants(g);
  std::sort(h.begin(), h.end());
  Fnv1a f;
  f.u64(g.atoms.size()).u64(g.bonds.size());
  for (auto v : h) f.u64(v);
  return f.value();
}

std::vector<int> canonical_rank(const MolGraph& g) {
  const std::size_t n = g.atoms.size();
  std::vector<std::uint64_t> init(n);
  for (std::size_t i = 0; i < n; ++i) init[i] = initial_invariant(g.atoms[i]);
  std::vector<int> cls = dense_classes(init);
  refine(g, cls);
  while (count_distinct(cls) < n) {
    // Lowest class that still holds a tie; its lowest-index atom goes first.
    std::vector<int> members(n, 0);
    for (int c : cls) ++members[static_cast<std::size_t>(c)];
    int tied = 0;
    while (members[static_cast<std::size_t>(tied)] < 2) ++tied;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (cls[i] == tied) {
        chosen = i;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (cls[i] > tied || (cls[i] == tied && i != chosen)) ++cls[i];
    }
    refine(g, cls);
  }
  return cls;
}

std::string write_smiles(const MolGraph& g, const std::vector<int>& priority) {
  return Writer(g, priority).run();
}

std::string canonicalize(const MolGraph& g) { return write_smiles(g, canonical_rank(g)); }

std::string random_smiles(const MolGraph& g, Rng& rng) {
  const auto perm = rng.permutation(g.atoms.size());
  std::vector<int> priority(perm.begin(), perm.end());
  return write_smiles(g, priority);
}

}  // namespace cb2::chem
