#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace cb2 {

// 64-bit FNV-1a. Every multi-byte integer is fed little-endian so the
// resulting hashes are identical on every platform.
class Fnv1a {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  Fnv1a() = default;

  Fnv1a& byte(std::uint8_t b) {
    state_ ^= b;
    state_ *= kPrime;
    return *this;
  }
  Fnv1a& u32(std::uint32_t v);
  Fnv1a& u64(std::uint64_t v);
  Fnv1a& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
  // Length-prefixed, so ("ab","c") and ("a","bc") differ.
  Fnv1a& str(std::string_view s);

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

std::uint64_t fnv1a(std::string_view bytes);

// Hash of an ordered list of 64-bit words.
std::uint64_t hash_words(std::span<const std::uint64_t> words);

// Derive an independent seed from a base seed and a stream index.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cb2
