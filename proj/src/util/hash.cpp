#include "cb2/util/hash.hpp"

namespace cb2 {

Fnv1a& Fnv1a::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Fnv1a& Fnv1a::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Fnv1a& Fnv1a::str(std::string_view s) {
  u64(s.size());
  for (char c : s) byte(static_cast<std::uint8_t>(c));
  return *this;
}

std::uint64_t fnv1a(std::string_view bytes) {
  Fnv1a h;
  for (char c : bytes) h.byte(static_cast<std::uint8_t>(c));
  return h.value();
}

std::uint64_t hash_words(std::span<const std::uint64_t> words) {
  Fnv1a h;
  for (auto w : words) h.u64(w);
  return h.value();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the FNV combination; cheap and well spread.
  std::uint64_t z = Fnv1a().u64(seed).u64(stream).value() + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cb2
