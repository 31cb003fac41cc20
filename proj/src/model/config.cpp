#include "cb2/model/config.hpp"

#include <cstdio>
#include <sstream>

namespace cb2::model {

std::string to_string(Task t) { return t == Task::Regression ? "reg" : "clf"; }

Task task_from_string(const std::string& s) {
  if (s == "reg" || s == "regression") return Task::Regression;
  if (s == "clf" || s == "classification") return Task::Classification;
  throw Error(ErrorCategory::Usage, "unknown task '" + s + "' (expected reg or clf)");
}

std::vector<std::string> default_prompt_motifs() {
  return {"aromatic-ring", "amide", "sulfonamide", "carbonyl", "halogen", "tertiary-amine", "ester", "long-alkyl-chain"};
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ModelError("invalid model config: " + m); };
  if (d_model <= 0 || n_heads <= 0) fail("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (n_layers < 0 || gcn_layers < 0) fail("layer counts must be non-negative");
  if (d_ff <= 0) fail("d_ff must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (n_prompts < 0) fail("n_prompts must be non-negative");
  if (n_prompts > 0 && prompt_motifs.empty()) fail("prompts need at least one motif");
  if (max_len <= n_prompts) fail("max_len must exceed n_prompts");
}

std::string ModelConfig::serialize() const {
  std::ostringstream out;
  out << "d_model=" << d_model << '\n'
      << "n_heads=" << n_heads << '\n'
      << "n_layers=" << n_layers << '\n'
      << "d_ff=" << d_ff << '\n';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", dropout);
  out << "dropout=" << buf << '\n'
      << "n_prompts=" << n_prompts << '\n'
      << "gcn_layers=" << gcn_layers << '\n'
      << "max_len=" << max_len << '\n'
      << "prompt_seed=" << prompt_seed << '\n'
      << "zero_init_heads=" << (zero_init_heads ? 1 : 0) << '\n'
      << "prompt_motifs=";
  for (std::size_t i = 0; i < prompt_motifs.size(); ++i) out << (i ? "," : "") << prompt_motifs[i];
  out << '\n';
  return out.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ModelError("bad config line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "d_model") c.d_model = std::stoi(val);
      else if (key == "n_heads") c.n_heads = std::stoi(val);
      else if (key == "n_layers") c.n_layers = std::stoi(val);
      else if (key == "d_ff") c.d_ff = std::stoi(val);
      else if (key == "dropout") c.dropout = std::stod(val);
      else if (key == "n_prompts") c.n_prompts = std::stoi(val);
      else if (key == "gcn_layers") c.gcn_layers = std::stoi(val);
      else if (key == "max_len") c.max_len = std::stoi(val);
      else if (key == "prompt_seed") c.prompt_seed = std::stoull(val);
      else if (key == "zero_init_heads") c.zero_init_heads = val == "1" || val == "true";
      else if (key == "prompt_motifs") {
        c.prompt_motifs.clear();
        std::istringstream ms(val);
        std::string m;
        while (std::getline(ms, m, ',')) {
          if (!m.empty()) c.prompt_motifs.push_back(m);
        }
      } else {
        throw ModelError("unknown config key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ModelError("bad value for config key '" + key + "': '" + val + "'");
    }
  }
  c.validate();
  return c;
}

}  // namespace cb2::model
