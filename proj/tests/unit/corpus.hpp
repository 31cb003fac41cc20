#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef CB2_TEST_DATA
#define CB2_TEST_DATA "tests/data"
#endif

namespace cb2::test {

struct CorpusEntry {
  std::string smiles;
  std::string name;
};

inline std::vector<CorpusEntry> load_corpus() {
  std::ifstream in(std::string(CB2_TEST_DATA) + "/corpus.smi");
  if (!in) throw std::runtime_error("missing corpus.smi");
  std::vector<CorpusEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    CorpusEntry e;
    ls >> e.smiles >> e.name;
    out.push_back(e);
  }
  return out;
}

}  // namespace cb2::test
