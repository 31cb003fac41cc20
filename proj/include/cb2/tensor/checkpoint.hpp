#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cb2/tensor/tensor.hpp"

namespace cb2::tensor {

// Binary container: "CB2F", u32 version, u32 count, then per tensor
// u32 name length, name bytes, u32 rank, u64 dims, f64 values. All
// little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void write_checkpoint(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

// Copies values from `saved` into the same-named tensors of `into`. Throws
// when a name is missing or a shape differs.
void assign_checkpoint(const NamedTensors& saved, const NamedTensors& into);

}  // namespace cb2::tensor
