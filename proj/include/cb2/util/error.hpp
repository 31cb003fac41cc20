#pragma once

#include <stdexcept>
#include <string>

namespace cb2 {

// Coarse classification used by the CLI to pick an exit code.
enum class ErrorCategory { Usage, Data, Model };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace cb2
