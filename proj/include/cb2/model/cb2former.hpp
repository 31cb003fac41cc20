#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cb2/model/config.hpp"
#include "cb2/model/input.hpp"
#include "cb2/tensor/checkpoint.hpp"
#include "cb2/tensor/ops.hpp"

namespace cb2::model {

using tensor::Tape;
using tensor::Tensor;

// Attention probabilities of one molecule: layers[l][h] is a row-major
// n x n matrix over [prompts..., SMILES tokens...].
struct AttentionRecord {
  std::size_t n_prompts = 0;
  std::vector<std::string> tokens;  // column labels, prompts first
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // SMILES tokens only
  std::vector<std::vector<std::vector<double>>> layers;

  std::size_t size() const { return tokens.size(); }
  double at(std::size_t layer, std::size_t head, std::size_t r, std::size_t c) const {
    return layers[layer][head][r * size() + c];
  }
};

// One unit-norm row per prompt, seeded by (motif, seed). Row i uses motif
// i mod |motifs|; repeats of a motif get distinct rows.
Tensor build_prompts(const std::vector<std::string>& motifs, int n_prompts, int d_model, std::uint64_t seed);

// Fixed sinusoidal table for positions 0..length-1.
Tensor positional_encoding(std::size_t length, int d_model);

// relu(a_hat * h * w)
Tensor gcn_layer(Tape& t, const tensor::SparseMatrix& a_hat, const Tensor& h, const Tensor& w);

class CB2former {
 public:
  CB2former(ModelConfig config, Vocab vocab, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const Tensor& prompts() const { return prompts_; }

  // Trainable tensors in a fixed order (the prompt matrix is not one).
  std::vector<Tensor> parameters() const;
  // Everything a checkpoint holds: parameters plus the prompt matrix.
  tensor::NamedTensors state() const;
  void load_state(const tensor::NamedTensors& saved);
  Tensor& param(const std::string& name);
  std::size_t parameter_count() const;

  // Per-atom embeddings after the GCN stack, [atoms, d_model].
  Tensor gcn_forward(Tape& t, const MoleculeInput& m);

  // Final hidden states of one molecule, [(n_prompts + L), d_model].
  Tensor encode(Tape& t, const MoleculeInput& m, std::uint64_t dropout_seed = 0, AttentionRecord* attn = nullptr);

  // Raw head output per molecule, [B, 1]: pActivity for regression, a
  // logit for classification.
  Tensor forward(Tape& t, std::span<const MoleculeInput* const> batch, Task task, std::uint64_t dropout_seed,
                 std::vector<AttentionRecord>* attn = nullptr);

  // Eval-mode predictions (probabilities for classification).
  std::vector<double> predict(std::span<const MoleculeInput> mols, Task task, std::size_t batch_size = 64);

 private:
  struct Encoded {
    Tensor states;       // all molecules stacked
    std::vector<std::size_t> offsets;  // first row of each molecule
  };
  Encoded encode_batch(Tape& t, std::span<const MoleculeInput* const> batch, std::uint64_t dropout_seed,
                       std::vector<AttentionRecord>* attn);
  Tensor& add_param(const std::string& name, std::size_t rows, std::size_t cols, int init, std::uint64_t seed);

  ModelConfig config_;
  Vocab vocab_;
  Tensor prompts_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace cb2::model
