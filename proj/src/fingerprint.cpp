#include "cb2/fingerprint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <deque>
#include <set>

#include "cb2/chem/canon.hpp"
#include "cb2/util/hash.hpp"

namespace cb2::fp {

using chem::MolGraph;

std::size_t BitVector::count() const {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

std::vector<std::size_t> BitVector::on_bits() const {
  std::vector<std::size_t> out;
  for (std::size_t wi = 0; wi < words_.size(); ++wi) {
    std::uint64_t w = words_[wi];
    while (w) {
      out.push_back(wi * 64 + static_cast<std::size_t>(std::countr_zero(w)));
      w &= w - 1;
    }
  }
  return out;
}

std::string BitVector::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const std::size_t nbytes = (size_ + 7) / 8;
  std::string out;
  out.reserve(nbytes * 2);
  for (std::size_t k = 0; k < nbytes; ++k) {
    const auto byte = static_cast<unsigned>((words_[k / 8] >> (8 * (k % 8))) & 0xffU);
    out.push_back(kDigits[byte >> 4]);
    out.push_back(kDigits[byte & 0xf]);
  }
  return out;
}

BitVector BitVector::from_hex(std::string_view hex, std::size_t size) {
  if (hex.size() != 2 * ((size + 7) / 8)) throw FingerprintError("hex length does not match bit count");
  auto nibble = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw FingerprintError("invalid hex digit");
  };
  BitVector bv(size);
  for (std::size_t k = 0; k < hex.size() / 2; ++k) {
    const unsigned byte = (nibble(hex[2 * k]) << 4) | nibble(hex[2 * k + 1]);
    for (unsigned bit = 0; bit < 8; ++bit) {
      const std::size_t idx = 8 * k + bit;
      if ((byte >> bit) & 1U) {
        if (idx >= size) throw FingerprintError("hex sets a bit past the end");
        bv.set(idx);
      }
    }
  }
  return bv;
}

std::string_view to_string(FpKind kind) {
  switch (kind) {
    case FpKind::Morgan: return "morgan";
    case FpKind::AtomPair: return "atompair";
    case FpKind::Torsion: return "torsion";
    case FpKind::Path: return "path";
    case FpKind::Concat: return "concat";
  }
  return "unknown";
}

FpKind fp_kind_from_string(std::string_view name) {
  for (auto k : {FpKind::Morgan, FpKind::AtomPair, FpKind::Torsion, FpKind::Path, FpKind::Concat}) {
    if (to_string(k) == name) return k;
  }
  throw FingerprintError("unknown fingerprint kind '" + std::string(name) + "'");
}

namespace {

void require_power_of_two(std::size_t nbits) {
  if (nbits == 0 || !std::has_single_bit(nbits)) {
    throw FingerprintError("fingerprint length must be a power of two");
  }
}

Fingerprint make(FpKind kind, std::size_t nbits) {
  require_power_of_two(nbits);
  Fingerprint f;
  f.kind = kind;
  f.bits = BitVector(nbits);
  f.params["nbits"] = std::to_string(nbits);
  return f;
}

std::uint64_t type_code(const MolGraph& g, int atom) {
  const auto& a = g.atoms[static_cast<std::size_t>(atom)];
  return Fnv1a().i64(a.element).i64(a.degree).i64(a.aromatic).value();
}

using AtomSet = std::vector<std::uint64_t>;

}  // namespace

std::vector<std::uint64_t> morgan_environments(const MolGraph& g, int radius) {
  if (radius < 0) throw FingerprintError("radius must be >= 0");
  const std::size_t n = g.atoms.size();
  const auto rank = chem::canonical_rank(g);
  std::vector<std::size_t> by_rank(n);
  for (std::size_t i = 0; i < n; ++i) by_rank[static_cast<std::size_t>(rank[i])] = i;

  std::vector<std::uint64_t> ids(n);
  std::vector<AtomSet> cover(n, AtomSet((n + 63) / 64, 0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = g.atoms[i];
    ids[i] = Fnv1a()
                 .i64(a.element)
                 .i64(a.degree)
                 .i64(a.total_h())
                 .i64(a.formal_charge)
                 .i64(a.aromatic)
                 .i64(a.in_ring)
                 .value();
    cover[i][i >> 6] |= std::uint64_t{1} << (i & 63);
  }

  std::set<AtomSet> seen;
  std::vector<std::uint64_t> out;
  auto collect = [&] {
    for (std::size_t root : by_rank) {
      if (seen.insert(cover[root]).second) out.push_back(ids[root]);
    }
  };
  collect();

  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next_ids(n);
    std::vector<AtomSet> next_cover = cover;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<int, std::uint64_t>> env;
      for (const auto& nb : g.adjacency[i]) {
        const auto ni = static_cast<std::size_t>(nb.atom);
        env.emplace_back(chem::bond_code(g.bonds[static_cast<std::size_t>(nb.bond)].order), ids[ni]);
        for (std::size_t w = 0; w < next_cover[i].size(); ++w) next_cover[i][w] |= cover[ni][w];
      }
      std::sort(env.begin(), env.end());
      Fnv1a h;
      h.i64(r).u64(ids[i]);
      for (const auto& [code, id] : env) h.i64(code).u64(id);
      next_ids[i] = h.value();
    }
    ids = std::move(next_ids);
    cover = std::move(next_cover);
    collect();
  }
  return out;
}

Fingerprint morgan_fp(const MolGraph& g, int radius, std::size_t nbits) {
  Fingerprint f = make(FpKind::Morgan, nbits);
  f.params["radius"] = std::to_string(radius);
  for (auto id : morgan_environments(g, radius)) f.bits.set(id % nbits);
  return f;
}

std::vector<int> bfs_distances(const MolGraph& g, int source) {
  std::vector<int> dist(g.atoms.size(), -1);
  std::deque<int> queue{source};
  dist[static_cast<std::size_t>(source)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (const auto& nb : g.adjacency[static_cast<std::size_t>(u)]) {
      auto& d = dist[static_cast<std::size_t>(nb.atom)];
      if (d < 0) {
        d = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(nb.atom);
      }
    }
  }
  return dist;
}

Fingerprint atom_pair_fp(const MolGraph& g, std::size_t nbits) {
  constexpr int kMaxDistance = 30;
  Fingerprint f = make(FpKind::AtomPair, nbits);
  f.params["max_distance"] = std::to_string(kMaxDistance);
  const int n = static_cast<int>(g.atoms.size());
  for (int i = 0; i < n; ++i) {
    const auto dist = bfs_distances(g, i);
    const std::uint64_t ti = type_code(g, i);
    for (int j = i + 1; j < n; ++j) {
      int d = dist[static_cast<std::size_t>(j)];
      if (d < 0) continue;  // different components
      d = std::min(d, kMaxDistance);
      const std::uint64_t tj = type_code(g, j);
      const auto code = Fnv1a().u64(std::min(ti, tj)).u64(std::max(ti, tj)).i64(d).value();
      f.bits.set(code % nbits);
    }
  }
  return f;
}

std::vector<std::array<int, 4>> torsion_paths(const MolGraph& g) {
  std::vector<std::array<int, 4>> paths;
  const int n = static_cast<int>(g.atoms.size());
  for (int a = 0; a < n; ++a) {
    for (const auto& nb : g.adjacency[static_cast<std::size_t>(a)]) {
      const int b = nb.atom;
      for (const auto& nc : g.adjacency[static_cast<std::size_t>(b)]) {
        const int c = nc.atom;
        if (c == a) continue;
        for (const auto& nd : g.adjacency[static_cast<std::size_t>(c)]) {
          const int d = nd.atom;
          if (d == b || d == a) continue;
          if (a > d) continue;  // each undirected path once
          std::array<int, 4> p{a, b, c, d};
          const std::array<std::uint64_t, 4> fwd{type_code(g, a), type_code(g, b), type_code(g, c),
                                                 type_code(g, d)};
          const std::array<std::uint64_t, 4> rev{fwd[3], fwd[2], fwd[1], fwd[0]};
          if (rev < fwd) p = {d, c, b, a};
          paths.push_back(p);
        }
      }
    }
  }
  return paths;
}

Fingerprint torsion_fp(const MolGraph& g, std::size_t nbits) {
  Fingerprint f = make(FpKind::Torsion, nbits);
  for (const auto& p : torsion_paths(g)) {
    Fnv1a h;
    for (int atom : p) h.u64(type_code(g, atom));
    f.bits.set(h.value() % nbits);
  }
  return f;
}

namespace {

void walk_paths(const MolGraph& g, int max_len, std::vector<int>& atoms, std::vector<int>& codes,
                std::vector<bool>& on_path, Fingerprint& f) {
  if (!codes.empty()) {
    // Sequence el0, b1, el1, ..., direction-normalized.
    std::vector<std::int64_t> seq;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (i) seq.push_back(codes[i - 1]);
      seq.push_back(g.atoms[static_cast<std::size_t>(atoms[i])].element);
    }
    std::vector<std::int64_t> rev(seq.rbegin(), seq.rend());
    const auto& canon = std::min(seq, rev);
    Fnv1a h;
    h.i64(static_cast<std::int64_t>(codes.size()));
    for (auto v : canon) h.i64(v);
    f.bits.set(h.value() % f.bits.size());
  }
  if (static_cast<int>(codes.size()) == max_len) return;
  const int tail = atoms.back();
  for (const auto& nb : g.adjacency[static_cast<std::size_t>(tail)]) {
    if (on_path[static_cast<std::size_t>(nb.atom)]) continue;
    on_path[static_cast<std::size_t>(nb.atom)] = true;
    atoms.push_back(nb.atom);
    codes.push_back(chem::bond_code(g.bonds[static_cast<std::size_t>(nb.bond)].order));
    walk_paths(g, max_len, atoms, codes, on_path, f);
    codes.pop_back();
    atoms.pop_back();
    on_path[static_cast<std::size_t>(nb.atom)] = false;
  }
}

}  // namespace

Fingerprint path_fp(const MolGraph& g, int max_len, std::size_t nbits) {
  if (max_len < 1) throw FingerprintError("path length must be >= 1");
  Fingerprint f = make(FpKind::Path, nbits);
  f.params["max_len"] = std::to_string(max_len);
  std::vector<bool> on_path(g.atoms.size(), false);
  for (int start = 0; start < static_cast<int>(g.atoms.size()); ++start) {
    std::vector<int> atoms{start};
    std::vector<int> codes;
    on_path[static_cast<std::size_t>(start)] = true;
    walk_paths(g, max_len, atoms, codes, on_path, f);
    on_path[static_cast<std::size_t>(start)] = false;
  }
  return f;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.length() != b.length()) throw FingerprintError("LengthMismatch: fingerprints differ in length");
  if (a.kind != b.kind) throw FingerprintError("LengthMismatch: fingerprints differ in kind");
  std::size_t both = 0, either = 0;
  const auto wa = a.bits.words();
  const auto wb = b.bits.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    both += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
    either += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
  }
  if (either == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

Fingerprint concat_fp(std::span<const Fingerprint> parts) {
  if (parts.empty()) throw FingerprintError("EmptyList: nothing to concatenate");
  std::size_t total = 0;
  std::string members;
  for (const auto& p : parts) {
    total += p.length();
    if (!members.empty()) members += '+';
    members += to_string(p.kind);
  }
  Fingerprint f;
  f.kind = FpKind::Concat;
  f.bits = BitVector(total);
  f.params["members"] = members;
  f.params["nbits"] = std::to_string(total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (auto bit : p.bits.on_bits()) f.bits.set(offset + bit);
    offset += p.length();
  }
  return f;
}

Fingerprint compute(FpKind kind, const MolGraph& g, std::size_t nbits) {
  switch (kind) {
    case FpKind::Morgan: return morgan_fp(g, 2, nbits);
    case FpKind::AtomPair: return atom_pair_fp(g, nbits);
    case FpKind::Torsion: return torsion_fp(g, nbits);
    case FpKind::Path: return path_fp(g, 7, nbits);
    case FpKind::Concat: break;
  }
  throw FingerprintError("concat fingerprints are built with concat_fp");
}

std::vector<Fingerprint> compute_many(FpKind kind, std::span<const MolGraph> mols, std::size_t nbits) {
  // Validate up front; nothing may throw inside the parallel region.
  if (kind == FpKind::Concat) throw FingerprintError("concat fingerprints are built with concat_fp");
  require_power_of_two(nbits);
  std::vector<Fingerprint> out(mols.size());
  const auto n = static_cast<std::ptrdiff_t>(mols.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = compute(kind, mols[static_cast<std::size_t>(i)], nbits);
  }
  return out;
}

}  // namespace cb2::fp
