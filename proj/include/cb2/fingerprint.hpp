#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cb2/chem/smiles.hpp"
#include "cb2/util/error.hpp"

namespace cb2::fp {

class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

  std::size_t size() const { return size_; }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  std::size_t count() const;
  std::vector<std::size_t> on_bits() const;
  std::span<const std::uint64_t> words() const { return words_; }

  // Byte k holds bits 8k..8k+7 (bit 8k in the least significant position);
  // each byte is written as two lowercase hex digits, high nibble first.
  std::string to_hex() const;
  static BitVector from_hex(std::string_view hex, std::size_t size);

  bool operator==(const BitVector&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

enum class FpKind { Morgan, AtomPair, Torsion, Path, Concat };

std::string_view to_string(FpKind kind);
FpKind fp_kind_from_string(std::string_view name);

class FingerprintError : public Error {
 public:
  explicit FingerprintError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

struct Fingerprint {
  FpKind kind = FpKind::Morgan;
  BitVector bits;
  std::map<std::string, std::string> params;

  std::size_t length() const { return bits.size(); }
  bool operator==(const Fingerprint&) const = default;
};

inline constexpr std::size_t kDefaultBits = 2048;

Fingerprint morgan_fp(const chem::MolGraph& g, int radius = 2, std::size_t nbits = kDefaultBits);
Fingerprint atom_pair_fp(const chem::MolGraph& g, std::size_t nbits = kDefaultBits);
Fingerprint torsion_fp(const chem::MolGraph& g, std::size_t nbits = kDefaultBits);
Fingerprint path_fp(const chem::MolGraph& g, int max_len = 7, std::size_t nbits = kDefaultBits);

// Unhashed ECFP identifiers surviving duplicate-environment removal, in
// emission order (radius, then canonical rank of the root).
std::vector<std::uint64_t> morgan_environments(const chem::MolGraph& g, int radius);

// Every simple 4-atom path, each listed once in the direction whose type
// codes compare lexicographically smaller.
std::vector<std::array<int, 4>> torsion_paths(const chem::MolGraph& g);

// Topological distances from `source`; -1 for unreachable atoms.
std::vector<int> bfs_distances(const chem::MolGraph& g, int source);

double tanimoto(const Fingerprint& a, const Fingerprint& b);

Fingerprint concat_fp(std::span<const Fingerprint> parts);

// Computes one fingerprint kind with its default parameters.
Fingerprint compute(FpKind kind, const chem::MolGraph& g, std::size_t nbits = kDefaultBits);

// Fingerprints a list of molecules in parallel; output order matches input.
std::vector<Fingerprint> compute_many(FpKind kind, std::span<const chem::MolGraph> mols,
                                      std::size_t nbits = kDefaultBits);

}  // namespace cb2::fp
