#include "cb2/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cb2/util/rng.hpp"

namespace cb2::tensor {

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& f, std::vector<Tensor> params, double eps,
                           std::size_t max_per_param, std::uint64_t seed) {
  std::vector<bool> restore(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    restore[p] = params[p].requires_grad();
    params[p].set_requires_grad(true);
    params[p].zero_grad();
  }
  {
    Tape tape(Mode::Eval);
    Tensor loss = f(tape);
    tape.backward(loss);
  }

  auto eval = [&]() {
    Tape tape(Mode::Eval, false);
    return f(tape).item();
  };

  GradCheckReport report;
  Rng rng(seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& x = params[p];
    std::vector<std::size_t> coords(x.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_per_param > 0 && coords.size() > max_per_param) {
      rng.shuffle(coords);
      coords.resize(max_per_param);
      std::sort(coords.begin(), coords.end());
    }
    const std::vector<double> analytic = x.has_grad() ? x.grad_values() : std::vector<double>(x.numel(), 0.0);
    for (std::size_t i : coords) {
      const double orig = x.data()[i];
      x.data()[i] = orig + eps;
      const double up = eval();
      x.data()[i] = orig - eps;
      const double down = eval();
      x.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double rel = abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), kGradCheckFloor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel > report.max_rel_error || report.checked == 0) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        char buf[160];
        std::snprintf(buf, sizeof buf, "param %zu[%zu]: analytic=%.10g numeric=%.10g", p, i, analytic[i], numeric);
        report.worst = buf;
      }
      ++report.checked;
    }
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    params[p].zero_grad();
    params[p].set_requires_grad(restore[p]);
  }
  return report;
}

}  // namespace cb2::tensor
