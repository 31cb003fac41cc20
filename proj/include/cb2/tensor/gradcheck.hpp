#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cb2/tensor/tape.hpp"

namespace cb2::tensor {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "param[i]: analytic=..., numeric=..."

  bool passed(double tol) const { return max_rel_error < tol; }
};

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps coordinates
// whose true gradient is ~0 from reporting pure round-off as huge error.
inline constexpr double kGradCheckFloor = 1e-6;

// `f` builds a scalar loss on the tape it is given; it must be
// deterministic. Checks every coordinate of every tensor in `params`, or a
// seeded sample of at most `max_per_param` coordinates of each when nonzero.
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& f, std::vector<Tensor> params, double eps = 1e-5,
                           std::size_t max_per_param = 0, std::uint64_t seed = 0);

inline GradCheckReport grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x,
                                  double eps = 1e-5) {
  return grad_check([&](Tape& t) { return f(t, x); }, std::vector<Tensor>{x}, eps);
}

}  // namespace cb2::tensor
