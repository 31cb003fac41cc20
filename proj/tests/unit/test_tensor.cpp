#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cb2/tensor/checkpoint.hpp"
#include "cb2/tensor/gradcheck.hpp"
#include "cb2/tensor/ops.hpp"
#include "cb2/util/rng.hpp"

using namespace cb2;
using namespace cb2::tensor;

namespace {

Tensor randn(std::size_t r, std::size_t c, std::uint64_t seed, bool grad = true) {
  Rng rng(seed);
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.normal();
  return Tensor(r, c, std::move(v), grad);
}

// Weighted sum with fixed irregular weights, so every output entry matters.
Tensor probe(Tape& t, const Tensor& y) {
  std::vector<double> w(y.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.0 + 0.7 * static_cast<double>(i));
  return sum(t, mul(t, y, Tensor(y.rows(), y.cols(), w)));
}

void expect_grad_ok(const std::function<Tensor(Tape&)>& f, std::vector<Tensor> params) {
  const auto rep = grad_check(f, std::move(params));
  EXPECT_TRUE(rep.passed(1e-6)) << rep.worst << " rel=" << rep.max_rel_error;
  EXPECT_GT(rep.checked, 0u);
}

}  // namespace

TEST(Tensor, ScalarHoldsItsValue) {
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_FALSE(Tensor::scalar(2.5).requires_grad());
}

TEST(Tensor, CopiesAliasClonesDoNot) {
  Tensor a(2, 2, std::vector<double>{1, 2, 3, 4});
  Tensor b = a;
  b.at(0, 0) = 9;
  EXPECT_EQ(a.at(0, 0), 9);
  Tensor c = a.clone();
  c.at(0, 0) = 1;
  EXPECT_EQ(a.at(0, 0), 9);
  EXPECT_TRUE(a.same(b));
  EXPECT_FALSE(a.same(c));
}

TEST(Tensor, ValueCountMustMatchShape) {
  EXPECT_THROW(Tensor(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Ops, MatmulValues) {
  Tape t(Mode::Eval, false);
  Tensor a(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor b(3, 2, std::vector<double>{7, 8, 9, 10, 11, 12});
  EXPECT_EQ(matmul(t, a, b).values(), (std::vector<double>{58, 64, 139, 154}));
  Tensor bt(2, 3, std::vector<double>{7, 9, 11, 8, 10, 12});
  EXPECT_EQ(matmul_nt(t, a, bt).values(), (std::vector<double>{58, 64, 139, 154}));
  EXPECT_THROW(matmul(t, a, a), ShapeError);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Tape t(Mode::Eval, false);
  Tensor x(3, 4, std::vector<double>{1, 2, 3, 4, -1000, 0, 1000, 1, 0, 0, 0, 0});
  const auto y = softmax_lastdim(t, x);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_GE(y.at(r, c), 0.0);
      s += y.at(r, c);
    }
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
  EXPECT_NEAR(y.at(0, 3), std::exp(4.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0) + std::exp(4.0)), 1e-15);
}

TEST(Ops, LayerNormRowsAreStandardized) {
  Tape t(Mode::Eval, false);
  const auto x = randn(4, 16, 1, false);
  Tensor g(1, 16, std::vector<double>(16, 1.0));
  Tensor b(1, 16);
  const auto y = layernorm_lastdim(t, x, g, b);
  for (std::size_t r = 0; r < 4; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 16; ++c) m += y.at(r, c);
    m /= 16;
    for (std::size_t c = 0; c < 16; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 16, 1.0, 1e-3);
  }
}

TEST(Ops, DropoutIsIdentityInEvalAndScaledInTrain) {
  const auto x = randn(10, 10, 2, false);
  Tape eval(Mode::Eval, false);
  EXPECT_TRUE(dropout(eval, x, 0.5, 1).same(x));
  Tape train(Mode::Train);
  const auto y = dropout(train, x, 0.5, 1);
  int zeros = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (y.values()[i] == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(y.values()[i], 2.0 * x.values()[i]);
    }
  }
  EXPECT_GT(zeros, 25);
  EXPECT_LT(zeros, 75);
  EXPECT_EQ(dropout(train, x, 0.5, 1).values(), y.values());
}

TEST(Ops, GatherRowsNegativeIsZero) {
  Tape t(Mode::Eval, false);
  Tensor x(2, 2, std::vector<double>{1, 2, 3, 4});
  const std::vector<int> idx{1, -1, 0};
  EXPECT_EQ(gather_rows(t, x, idx).values(), (std::vector<double>{3, 4, 0, 0, 1, 2}));
}

TEST(Ops, LossValues) {
  Tape t(Mode::Eval, false);
  Tensor p(2, 1, std::vector<double>{1, 3});
  Tensor y(2, 1, std::vector<double>{2, 1});
  EXPECT_DOUBLE_EQ(mse_loss(t, p, y).item(), (1.0 + 4.0) / 2.0);
  Tensor z(2, 1, std::vector<double>{0.3, -2});
  Tensor l(2, 1, std::vector<double>{1, 0});
  const double want = (std::log1p(std::exp(-0.3)) + std::log1p(std::exp(-2.0))) / 2.0;
  EXPECT_NEAR(bce_with_logits_loss(t, z, l).item(), want, 1e-15);
  Tensor big(1, 1, std::vector<double>{800});
  Tensor zero(1, 1, std::vector<double>{0});
  EXPECT_NEAR(bce_with_logits_loss(t, big, zero).item(), 800.0, 1e-9);
}

TEST(Autograd, ElementwiseAndLinearOps) {
  auto a = randn(3, 4, 10);
  auto b = randn(3, 4, 11);
  auto bias = randn(1, 4, 12);
  auto w = randn(4, 5, 13);
  auto w2 = randn(5, 4, 14);
  expect_grad_ok([&](Tape& t) { return probe(t, matmul(t, a, w)); }, {a, w});
  expect_grad_ok([&](Tape& t) { return probe(t, matmul_nt(t, a, w2)); }, {a, w2});
  expect_grad_ok([&](Tape& t) { return probe(t, add(t, a, b)); }, {a, b});
  expect_grad_ok([&](Tape& t) { return probe(t, add(t, a, bias)); }, {a, bias});
  expect_grad_ok([&](Tape& t) { return probe(t, mul(t, a, b)); }, {a, b});
  expect_grad_ok([&](Tape& t) { return probe(t, scale(t, a, -1.7)); }, {a});
  expect_grad_ok([&](Tape& t) { return probe(t, relu(t, a)); }, {a});
  expect_grad_ok([&](Tape& t) { return probe(t, sigmoid(t, a)); }, {a});
}

TEST(Autograd, StructuralOps) {
  auto a = randn(3, 4, 20);
  auto b = randn(2, 4, 21);
  auto c = randn(3, 2, 22);
  expect_grad_ok([&](Tape& t) { const Tensor p[] = {a, b}; return probe(t, concat_rows(t, p)); }, {a, b});
  expect_grad_ok([&](Tape& t) { const Tensor p[] = {a, c}; return probe(t, concat_cols(t, p)); }, {a, c});
  expect_grad_ok([&](Tape& t) { return probe(t, slice_rows(t, a, 1, 3)); }, {a});
  const std::vector<int> idx{2, 0, -1, 2};
  expect_grad_ok([&](Tape& t) { return probe(t, gather_rows(t, a, idx)); }, {a});
  const std::vector<int> ids{1, 1, 0};
  expect_grad_ok([&](Tape& t) { return probe(t, embedding_lookup(t, a, ids)); }, {a});
  expect_grad_ok([&](Tape& t) { return probe(t, mean_rows(t, a)); }, {a});
  SparseMatrix s;
  s.cols = 3;
  const std::pair<std::size_t, double> r0[] = {{0, 0.5}, {2, 0.25}};
  const std::pair<std::size_t, double> r1[] = {{1, 1.0}};
  s.add_row(r0);
  s.add_row(r1);
  expect_grad_ok([&](Tape& t) { return probe(t, spmm(t, s, a)); }, {a});
}

TEST(Autograd, NormalizationAndLosses) {
  auto x = randn(3, 6, 30);
  auto g = randn(1, 6, 31);
  auto b = randn(1, 6, 32);
  expect_grad_ok([&](Tape& t) { return probe(t, softmax_lastdim(t, x)); }, {x});
  expect_grad_ok([&](Tape& t) { return probe(t, layernorm_lastdim(t, x, g, b)); }, {x, g, b});
  auto p = randn(5, 1, 33);
  Tensor y = randn(5, 1, 34, false);
  Tensor lab(5, 1, std::vector<double>{1, 0, 0, 1, 1});
  expect_grad_ok([&](Tape& t) { return mse_loss(t, p, y); }, {p});
  expect_grad_ok([&](Tape& t) { return bce_with_logits_loss(t, p, lab); }, {p});
}

TEST(Autograd, DropoutGradientUsesSameMask) {
  auto x = randn(4, 4, 40);
  // grad_check runs in eval mode, so check the train-mode mask by hand.
  Tape t(Mode::Train);
  auto y = dropout(t, x, 0.3, 5);
  auto l = sum(t, y);
  t.backward(l);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double want = y.values()[i] == 0.0 ? 0.0 : 1.0 / 0.7;
    EXPECT_NEAR(x.grad()[i], want, 1e-15);
  }
}

TEST(Autograd, GradientsAccumulateOverReuse) {
  Tensor x(1, 1, std::vector<double>{3.0}, true);
  Tape t;
  auto y = add(t, mul(t, x, x), x);
  t.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Autograd, TapeErrors) {
  Tensor x(2, 1, std::vector<double>{1, 2}, true);
  Tape t;
  auto y = scale(t, x, 2.0);
  try {
    t.backward(y);
    FAIL();
  } catch (const AutogradError& e) {
    EXPECT_EQ(e.kind(), AutogradErrorKind::NonScalarLoss);
  }
  auto l = sum(t, y);
  t.backward(l);
  try {
    t.backward(l);
    FAIL();
  } catch (const AutogradError& e) {
    EXPECT_EQ(e.kind(), AutogradErrorKind::TapeConsumed);
  }
}

TEST(Autograd, FrozenTensorsGetNoGradient) {
  auto w = randn(3, 3, 50);
  auto frozen = randn(3, 3, 51, false);
  Tape t;
  auto l = sum(t, matmul(t, frozen, w));
  t.backward(l);
  EXPECT_TRUE(w.has_grad());
  EXPECT_FALSE(frozen.has_grad());
  Tape off(Mode::Train, false);
  auto l2 = sum(off, matmul(off, frozen, w));
  EXPECT_EQ(off.size(), 0u);
  (void)l2;
}

TEST(Checkpoint, RoundTripIsExact) {
  NamedTensors in = {{"a", randn(3, 4, 60)}, {"b.c", randn(1, 1, 61)}};
  std::stringstream ss;
  write_checkpoint(ss, in);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "CB2F");
  const auto out = read_checkpoint(ss);
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(out[i].first, in[i].first);
    EXPECT_EQ(out[i].second.shape(), in[i].second.shape());
    EXPECT_EQ(out[i].second.values(), in[i].second.values());
  }
  std::stringstream again;
  write_checkpoint(again, out);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Checkpoint, RejectsGarbageAndMissingNames) {
  std::stringstream bad("NOPE");
  EXPECT_THROW(read_checkpoint(bad), Error);
  NamedTensors in = {{"a", randn(2, 2, 62)}};
  std::stringstream ss;
  write_checkpoint(ss, in);
  std::string truncated = ss.str();
  truncated.resize(truncated.size() - 3);
  std::stringstream tr(truncated);
  EXPECT_THROW(read_checkpoint(tr), Error);
  NamedTensors into = {{"z", Tensor(2, 2)}};
  EXPECT_THROW(assign_checkpoint(in, into), Error);
  NamedTensors wrong = {{"a", Tensor(3, 2)}};
  EXPECT_THROW(assign_checkpoint(in, wrong), Error);
  NamedTensors right = {{"a", Tensor(2, 2)}};
  assign_checkpoint(in, right);
  EXPECT_EQ(right[0].second.values(), in[0].second.values());
}
