#include "cb2/tensor/tape.hpp"

namespace cb2::tensor {

void Tape::backward(Tensor& loss) {
  if (consumed_) throw AutogradError(AutogradErrorKind::TapeConsumed, "TapeConsumed: backward already ran on this tape");
  if (loss.numel() != 1) {
    throw AutogradError(AutogradErrorKind::NonScalarLoss, "NonScalarLoss: loss has shape " + shape_string(loss.shape()));
  }
  consumed_ = true;
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
  nodes_.shrink_to_fit();
}

}  // namespace cb2::tensor
