#pragma once

#include <string>
#include <vector>

namespace cb2::cli {

// Exit codes: 0 ok, 2 usage, 3 data, 4 model, 1 anything unexpected.
int dispatch(int argc, char** argv);
int dispatch(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace cb2::cli
