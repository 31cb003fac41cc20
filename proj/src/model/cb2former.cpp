#include "cb2/model/cb2former.hpp"

#include <algorithm>
#include <cmath>

#include "cb2/util/hash.hpp"
#include "cb2/util/rng.hpp"

namespace cb2::model {

namespace {

enum Init { kZero = 0, kOne = 1, kXavier = 2, kNormal = 3 };

std::string layer_name(int l, const std::string& rest) { return "layer" + std::to_string(l) + "." + rest; }

}  // namespace

Tensor build_prompts(const std::vector<std::string>& motifs, int n_prompts, int d_model, std::uint64_t seed) {
  Tensor p(static_cast<std::size_t>(n_prompts), static_cast<std::size_t>(d_model));
  if (n_prompts > 0 && motifs.empty()) throw ModelError("prompts need at least one motif");
  for (int i = 0; i < n_prompts; ++i) {
    const auto& motif = motifs[static_cast<std::size_t>(i) % motifs.size()];
    const auto cycle = static_cast<std::uint64_t>(i) / motifs.size();
    Rng rng(Fnv1a().str(motif).u64(seed).u64(cycle).value());
    double norm = 0.0;
    for (int j = 0; j < d_model; ++j) {
      const double v = rng.normal();
      p.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (int j = 0; j < d_model; ++j) p.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) /= norm;
  }
  return p;
}

Tensor positional_encoding(std::size_t length, int d_model) {
  Tensor pe(length, static_cast<std::size_t>(d_model));
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (int i = 0; i < d_model; i += 2) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / d_model);
      pe.at(pos, static_cast<std::size_t>(i)) = std::sin(angle);
      if (i + 1 < d_model) pe.at(pos, static_cast<std::size_t>(i + 1)) = std::cos(angle);
    }
  }
  return pe;
}

Tensor gcn_layer(Tape& t, const tensor::SparseMatrix& a_hat, const Tensor& h, const Tensor& w) {
  return tensor::relu(t, tensor::spmm(t, a_hat, tensor::matmul(t, h, w)));
}

CB2former::CB2former(ModelConfig config, Vocab vocab, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto dk = static_cast<std::size_t>(config_.d_k());
  const auto dff = static_cast<std::size_t>(config_.d_ff);

  prompts_ = build_prompts(config_.prompt_motifs, config_.n_prompts, config_.d_model, config_.prompt_seed);
  prompts_.set_requires_grad(false);

  add_param("tok_emb", vocab_.size(), d, kNormal, seed);
  add_param("atom_element", kElementBuckets, d, kNormal, seed);
  add_param("atom_aromatic", 2, d, kNormal, seed);
  add_param("atom_degree", kDegreeBuckets, d, kNormal, seed);
  for (int l = 0; l < config_.gcn_layers; ++l) add_param("gcn" + std::to_string(l) + ".w", d, d, kXavier, seed);
  add_param("fuse.w", d, d, kXavier, seed);
  add_param("fuse.b", 1, d, kZero, seed);
  for (int l = 0; l < config_.n_layers; ++l) {
    for (int h = 0; h < config_.n_heads; ++h) {
      const std::string hp = "head" + std::to_string(h) + ".";
      add_param(layer_name(l, hp + "wq"), d, dk, kXavier, seed);
      add_param(layer_name(l, hp + "wk"), d, dk, kXavier, seed);
      add_param(layer_name(l, hp + "wv"), d, dk, kXavier, seed);
    }
    add_param(layer_name(l, "wo"), d, d, kXavier, seed);
    add_param(layer_name(l, "bo"), 1, d, kZero, seed);
    add_param(layer_name(l, "ln1.g"), 1, d, kOne, seed);
    add_param(layer_name(l, "ln1.b"), 1, d, kZero, seed);
    add_param(layer_name(l, "ff.w1"), d, dff, kXavier, seed);
    add_param(layer_name(l, "ff.b1"), 1, dff, kZero, seed);
    add_param(layer_name(l, "ff.w2"), dff, d, kXavier, seed);
    add_param(layer_name(l, "ff.b2"), 1, d, kZero, seed);
    add_param(layer_name(l, "ln2.g"), 1, d, kOne, seed);
    add_param(layer_name(l, "ln2.b"), 1, d, kZero, seed);
  }
  const int head_init = config_.zero_init_heads ? kZero : kXavier;
  add_param("reg.w", d, 1, head_init, seed);
  add_param("reg.b", 1, 1, kZero, seed);
  add_param("clf.w", d, 1, head_init, seed);
  add_param("clf.b", 1, 1, kZero, seed);
}

Tensor& CB2former::add_param(const std::string& name, std::size_t rows, std::size_t cols, int init,
                             std::uint64_t seed) {
  Tensor t(rows, cols, true);
  Rng rng(mix_seed(seed, fnv1a(name)));
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.values()) {
    switch (init) {
      case kZero: v = 0.0; break;
      case kOne: v = 1.0; break;
      case kXavier: v = rng.uniform(-limit, limit); break;
      default: v = rng.normal(); break;
    }
  }
  params_.emplace_back(name, t);
  return params_.back().second;
}

std::vector<Tensor> CB2former::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

tensor::NamedTensors CB2former::state() const {
  tensor::NamedTensors out = params_;
  out.emplace_back("prompts", prompts_);
  return out;
}

void CB2former::load_state(const tensor::NamedTensors& saved) { tensor::assign_checkpoint(saved, state()); }

Tensor& CB2former::param(const std::string& name) {
  for (auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw ModelError("no parameter named '" + name + "'");
}

std::size_t CB2former::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

Tensor CB2former::gcn_forward(Tape& t, const MoleculeInput& m) {
  if (m.atoms() == 0) throw ModelError("EmptyGraph: molecule has no atoms");
  Tensor h = tensor::add(t, tensor::embedding_lookup(t, param("atom_element"), m.atom_element),
                         tensor::embedding_lookup(t, param("atom_aromatic"), m.atom_aromatic));
  h = tensor::add(t, h, tensor::embedding_lookup(t, param("atom_degree"), m.atom_degree));
  for (int l = 0; l < config_.gcn_layers; ++l) h = gcn_layer(t, m.a_hat, h, param("gcn" + std::to_string(l) + ".w"));
  return h;
}

CB2former::Encoded CB2former::encode_batch(Tape& t, std::span<const MoleculeInput* const> batch,
                                           std::uint64_t dropout_seed, std::vector<AttentionRecord>* attn) {
  const auto np = static_cast<std::size_t>(config_.n_prompts);
  const std::size_t heads = static_cast<std::size_t>(config_.n_heads);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(config_.d_k()));
  std::uint64_t dropout_calls = 0;
  auto drop = [&](const Tensor& x) { return tensor::dropout(t, x, config_.dropout, mix_seed(dropout_seed, dropout_calls++)); };

  // Atoms and tokens of the whole batch, stacked.
  std::vector<int> elem, arom, deg, tok_ids, tok_atom, seq_index;
  tensor::SparseMatrix a_hat;
  std::size_t atom_base = 0, tok_base = 0, max_len = 0;
  for (const MoleculeInput* m : batch) {
    if (m->atoms() == 0) throw ModelError("EmptyGraph: molecule has no atoms");
    if (np + m->length() > static_cast<std::size_t>(config_.max_len)) {
      throw ModelError("SequenceTooLong: " + std::to_string(np + m->length()) + " rows exceed max_len " +
                       std::to_string(config_.max_len));
    }
    elem.insert(elem.end(), m->atom_element.begin(), m->atom_element.end());
    arom.insert(arom.end(), m->atom_aromatic.begin(), m->atom_aromatic.end());
    deg.insert(deg.end(), m->atom_degree.begin(), m->atom_degree.end());
    for (std::size_t r = 0; r < m->a_hat.rows; ++r) {
      std::vector<std::pair<std::size_t, double>> row;
      for (std::size_t e = m->a_hat.row_ptr[r]; e < m->a_hat.row_ptr[r + 1]; ++e) {
        row.emplace_back(atom_base + m->a_hat.col_idx[e], m->a_hat.val[e]);
      }
      a_hat.add_row(row);
    }
    tok_ids.insert(tok_ids.end(), m->token_ids.begin(), m->token_ids.end());
    for (int a : m->token_to_atom) tok_atom.push_back(a < 0 ? -1 : a + static_cast<int>(atom_base));
    // Rows of concat_rows(prompts, tokens) forming this molecule's sequence.
    for (std::size_t p = 0; p < np; ++p) seq_index.push_back(static_cast<int>(p));
    for (std::size_t i = 0; i < m->length(); ++i) seq_index.push_back(static_cast<int>(np + tok_base + i));
    atom_base += m->atoms();
    tok_base += m->length();
    max_len = std::max(max_len, m->length());
  }
  a_hat.cols = atom_base;

  Tensor h = tensor::add(t, tensor::embedding_lookup(t, param("atom_element"), elem),
                         tensor::embedding_lookup(t, param("atom_aromatic"), arom));
  h = tensor::add(t, h, tensor::embedding_lookup(t, param("atom_degree"), deg));
  for (int l = 0; l < config_.gcn_layers; ++l) h = gcn_layer(t, a_hat, h, param("gcn" + std::to_string(l) + ".w"));
  Tensor fused = tensor::add(t, tensor::matmul(t, h, param("fuse.w")), param("fuse.b"));

  const Tensor pe_table = positional_encoding(max_len, config_.d_model);
  std::vector<int> positions;
  for (const MoleculeInput* m : batch) {
    for (std::size_t i = 0; i < m->length(); ++i) positions.push_back(static_cast<int>(i));
  }
  Tensor tokens = tensor::embedding_lookup(t, param("tok_emb"), tok_ids);
  tokens = tensor::add(t, tokens, tensor::gather_rows(t, pe_table, positions));
  tokens = tensor::add(t, tokens, tensor::gather_rows(t, fused, tok_atom));

  const Tensor both[] = {prompts_, tokens};
  Tensor x = np > 0 ? tensor::gather_rows(t, tensor::concat_rows(t, both), seq_index) : tokens;
  x = drop(x);

  Encoded enc;
  std::size_t off = 0;
  for (const MoleculeInput* m : batch) {
    enc.offsets.push_back(off);
    off += np + m->length();
  }
  if (attn) {
    attn->clear();
    for (const MoleculeInput* m : batch) {
      AttentionRecord rec;
      rec.n_prompts = np;
      for (std::size_t p = 0; p < np; ++p) rec.tokens.push_back("<prompt" + std::to_string(p) + ">");
      rec.tokens.insert(rec.tokens.end(), m->token_text.begin(), m->token_text.end());
      rec.spans = m->token_span;
      rec.layers.assign(static_cast<std::size_t>(config_.n_layers), std::vector<std::vector<double>>(heads));
      attn->push_back(std::move(rec));
    }
  }

  for (int l = 0; l < config_.n_layers; ++l) {
    std::vector<Tensor> head_out;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const std::string hp = "head" + std::to_string(hd) + ".";
      const Tensor q = tensor::matmul(t, x, param(layer_name(l, hp + "wq")));
      const Tensor k = tensor::matmul(t, x, param(layer_name(l, hp + "wk")));
      const Tensor v = tensor::matmul(t, x, param(layer_name(l, hp + "wv")));
      std::vector<Tensor> per_mol;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const std::size_t r0 = enc.offsets[b];
        const std::size_t r1 = r0 + np + batch[b]->length();
        const Tensor scores = tensor::scale(
            t, tensor::matmul_nt(t, tensor::slice_rows(t, q, r0, r1), tensor::slice_rows(t, k, r0, r1)), inv_sqrt_dk);
        const Tensor probs = tensor::softmax_lastdim(t, scores);
        if (attn) (*attn)[b].layers[static_cast<std::size_t>(l)][hd] = probs.values();
        per_mol.push_back(tensor::matmul(t, drop(probs), tensor::slice_rows(t, v, r0, r1)));
      }
      head_out.push_back(tensor::concat_rows(t, per_mol));
    }
    Tensor mha = tensor::add(t, tensor::matmul(t, tensor::concat_cols(t, head_out), param(layer_name(l, "wo"))),
                             param(layer_name(l, "bo")));
    x = tensor::layernorm_lastdim(t, tensor::add(t, x, drop(mha)), param(layer_name(l, "ln1.g")),
                                  param(layer_name(l, "ln1.b")));
    Tensor ff = tensor::relu(t, tensor::add(t, tensor::matmul(t, x, param(layer_name(l, "ff.w1"))),
                                            param(layer_name(l, "ff.b1"))));
    ff = tensor::add(t, tensor::matmul(t, ff, param(layer_name(l, "ff.w2"))), param(layer_name(l, "ff.b2")));
    x = tensor::layernorm_lastdim(t, tensor::add(t, x, drop(ff)), param(layer_name(l, "ln2.g")),
                                  param(layer_name(l, "ln2.b")));
  }
  enc.states = x;
  return enc;
}

Tensor CB2former::encode(Tape& t, const MoleculeInput& m, std::uint64_t dropout_seed, AttentionRecord* attn) {
  const MoleculeInput* one[] = {&m};
  std::vector<AttentionRecord> recs;
  auto enc = encode_batch(t, one, dropout_seed, attn ? &recs : nullptr);
  if (attn) *attn = std::move(recs.front());
  return enc.states;
}

Tensor CB2former::forward(Tape& t, std::span<const MoleculeInput* const> batch, Task task,
                          std::uint64_t dropout_seed, std::vector<AttentionRecord>* attn) {
  auto enc = encode_batch(t, batch, dropout_seed, attn);
  const auto np = static_cast<std::size_t>(config_.n_prompts);
  // Mean over SMILES-token rows only.
  tensor::SparseMatrix pool;
  pool.cols = enc.states.rows();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::size_t len = batch[b]->length();
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t i = 0; i < len; ++i) row.emplace_back(enc.offsets[b] + np + i, 1.0 / static_cast<double>(len));
    pool.add_row(row);
  }
  const Tensor pooled = tensor::spmm(t, pool, enc.states);
  const bool reg = task == Task::Regression;
  return tensor::add(t, tensor::matmul(t, pooled, param(reg ? "reg.w" : "clf.w")), param(reg ? "reg.b" : "clf.b"));
}

std::vector<double> CB2former::predict(std::span<const MoleculeInput> mols, Task task, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(mols.size());
  for (std::size_t s = 0; s < mols.size(); s += batch_size) {
    std::vector<const MoleculeInput*> batch;
    for (std::size_t i = s; i < std::min(mols.size(), s + batch_size); ++i) batch.push_back(&mols[i]);
    Tape tape(tensor::Mode::Eval, false);
    Tensor y = forward(tape, batch, task, 0);
    if (task == Task::Classification) y = tensor::sigmoid(tape, y);
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return out;
}

}  // namespace cb2::model
