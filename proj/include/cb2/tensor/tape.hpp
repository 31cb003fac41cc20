#pragma once

#include <functional>
#include <vector>

#include "cb2/tensor/tensor.hpp"

namespace cb2::tensor {

enum class Mode { Train, Eval };

enum class AutogradErrorKind { NonScalarLoss, TapeConsumed };

class AutogradError : public Error {
 public:
  AutogradError(AutogradErrorKind kind, const std::string& what) : Error(ErrorCategory::Model, what), kind_(kind) {}
  AutogradErrorKind kind() const noexcept { return kind_; }

 private:
  AutogradErrorKind kind_;
};

// Records backward closures in execution order. With recording off (or when
// no input needs a gradient) ops just compute values.
class Tape {
 public:
  explicit Tape(Mode mode = Mode::Train, bool recording = true) : mode_(mode), recording_(recording) {}

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::Train; }
  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  void push(std::function<void()> backward) { nodes_.push_back(std::move(backward)); }

  // Seeds d(loss)/d(loss) = 1 and runs every closure once, newest first.
  // The tape can be used only once.
  void backward(Tensor& loss);

 private:
  Mode mode_;
  bool recording_;
  bool consumed_ = false;
  std::vector<std::function<void()>> nodes_;
};

}  // namespace cb2::tensor
