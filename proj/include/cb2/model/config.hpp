#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cb2/util/error.hpp"

namespace cb2::model {

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& what) : Error(ErrorCategory::Model, what) {}
};

enum class Task { Regression, Classification };

std::string to_string(Task t);
Task task_from_string(const std::string& s);  // "reg" / "clf" (long names accepted)

std::vector<std::string> default_prompt_motifs();

struct ModelConfig {
  int d_model = 128;
  int n_heads = 4;
  int n_layers = 2;
  int d_ff = 256;
  double dropout = 0.1;
  int n_prompts = 8;
  int gcn_layers = 2;
  int max_len = 512;
  std::uint64_t prompt_seed = 0;
  bool zero_init_heads = false;
  std::vector<std::string> prompt_motifs = default_prompt_motifs();

  int d_k() const { return d_model / n_heads; }
  void validate() const;

  // Flat key=value lines, one per field, in a fixed order.
  std::string serialize() const;
  static ModelConfig parse(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace cb2::model
