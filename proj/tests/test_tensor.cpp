#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "bvqa/errors.hpp"
#include "bvqa/gradcheck.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/tensor.hpp"

using namespace bvqa;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, bool grad = true) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from({r, c}, v, grad);
}

}  // namespace

TEST(Elementwise, SpecExamples) {
  EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(exp(Tensor::scalar(0.0)).item(), 1.0);
  EXPECT_EQ(values(add(Tensor::vector({1, 2}), Tensor::vector({3, 4}))), (std::vector<double>{4, 6}));
}

TEST(Elementwise, ScalarBroadcastBothSides) {
  const Tensor v = Tensor::vector({1, 2, 3});
  const Tensor s = Tensor::vector({2});
  EXPECT_EQ(values(mul(v, s)), (std::vector<double>{2, 4, 6}));
  EXPECT_EQ(values(sub(s, v)), (std::vector<double>{1, 0, -1}));
  EXPECT_EQ(values(v / 2.0), (std::vector<double>{0.5, 1, 1.5}));
}

TEST(Elementwise, Errors) {
  EXPECT_THROW(add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), std::invalid_argument);
  EXPECT_THROW(log(Tensor::vector({1, -1})), NumericError);
  EXPECT_THROW(log(Tensor::vector({0.0})), NumericError);
  EXPECT_THROW(sqrt(Tensor::vector({-0.5})), NumericError);
  EXPECT_THROW(div(Tensor::vector({1, 2}), Tensor::vector({1, 0})), NumericError);
  EXPECT_THROW(Tensor::vector({1, std::numeric_limits<double>::quiet_NaN()}), NumericError);
  EXPECT_THROW(exp(Tensor::vector({1000.0})), NumericError);
}

TEST(Elementwise, SigmoidIsStableForLargeInputs) {
  const Tensor s = sigmoid(Tensor::vector({-800.0, 800.0}));
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 1.0);
}

TEST(Elementwise, MaximumRoutesKinkToConstant) {
  Tensor x = Tensor::vector({-1.0, 0.5, 2.0}, true);
  sum(maximum(x, 0.5)).backward();
  EXPECT_EQ(x.grad_or_zeros(), (std::vector<double>{0, 0, 1}));
}

TEST(Matmul, SpecExamples) {
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(matmul(eye, m)), values(m));
  const Tensor pick = matmul(Tensor::from({1, 2}, {1, 0}), Tensor::from({2, 1}, {0, 5}));
  EXPECT_EQ(pick.shape(), (Shape{1, 1}));
  EXPECT_EQ(pick[0], 0.0);
  EXPECT_THROW(matmul(Tensor::from({2, 3}, std::vector<double>(6)), m), std::invalid_argument);
}

TEST(Matmul, GradientOfSumIsOnesTimesBTranspose) {
  Rng rng(3);
  Tensor a = random_matrix(rng, 3, 4);
  const Tensor b = random_matrix(rng, 4, 2, false);
  sum(matmul(a, b)).backward();
  // ones(3x2) . b^T: every row equals the row sums of b.
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(a.grad()[i * 4 + k], b.at(k, 0) + b.at(k, 1), 1e-15);
    }
  }
  EXPECT_LT(check_gradient([&] { return sum(matmul(a, b)); }, {a}), 1e-4);
}

TEST(Reductions, SpecExamples) {
  EXPECT_EQ(mean(Tensor::vector({2, 2, 2})).item(), 2.0);
  EXPECT_EQ(std_dev(Tensor::vector({2, 2, 2})).item(), 0.0);
  Tensor x = Tensor::vector({3, 1, 2}, true);
  const Tensor m = min(x);
  EXPECT_EQ(m.item(), 1.0);
  m.backward();
  EXPECT_EQ(x.grad_or_zeros(), (std::vector<double>{0, 1, 0}));
  EXPECT_LT(check_gradient([&] { return min(x); }, {x}), 1e-4);
}

TEST(Reductions, PopulationStd) { EXPECT_NEAR(std_dev(Tensor::vector({1, 3})).item(), 1.0, 1e-15); }

TEST(Reductions, MinTieGoesToFirstIndex) {
  Tensor x = Tensor::vector({2, 1, 1}, true);
  EXPECT_EQ(argmin(x), 1u);
  min(x).backward();
  EXPECT_EQ(x.grad_or_zeros(), (std::vector<double>{0, 1, 0}));
}

TEST(Reductions, AxisVariants) {
  const Tensor x = Tensor::from({2, 3}, {1, 5, 3, 4, 2, 6});
  EXPECT_EQ(values(sum(x, 0)), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(values(mean(x, 1)), (std::vector<double>{3, 4}));
  const MinResult m = min(x, 1);
  EXPECT_EQ(values(m.values), (std::vector<double>{1, 2}));
  EXPECT_EQ(m.indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(std_dev(x, 0)[0], 1.5, 1e-15);
}

TEST(Reductions, EmptyInputsRejected) {
  EXPECT_THROW(mean(Tensor::from({0}, {})), std::invalid_argument);
  EXPECT_THROW(min(Tensor::from({0}, {})), std::invalid_argument);
  EXPECT_THROW(sum(Tensor::from({2, 3}, std::vector<double>(6)), 2), std::invalid_argument);
}

TEST(Backward, SpecExamples) {
  Tensor w = Tensor::vector({0.3, -2.0, 7.0}, true);
  sum(w).backward();
  EXPECT_EQ(w.grad_or_zeros(), (std::vector<double>{1, 1, 1}));

  Tensor v = Tensor::vector({1, 2}, true);
  sum(square(v)).backward();
  EXPECT_EQ(v.grad_or_zeros(), (std::vector<double>{2, 4}));
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor w = Tensor::vector({1, 2}, true);
  EXPECT_THROW((w * 2.0).backward(), std::invalid_argument);
}

TEST(Backward, TapeClearedAfterBackward) {
  Tensor w = Tensor::vector({1, 2}, true);
  const Tensor loss = sum(exp(w) * w);
  EXPECT_GT(GradTape::size(), 0u);
  loss.backward();
  EXPECT_EQ(GradTape::size(), 0u);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor w = Tensor::vector({1, 2}, true);
  GradTape::clear();
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    const Tensor y = sum(w * w);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_EQ(GradTape::size(), 0u);
}

TEST(Backward, LeafGradientsAccumulateUntilZeroed) {
  Tensor w = Tensor::vector({1, 2}, true);
  sum(w * 3.0).backward();
  sum(w * 3.0).backward();
  EXPECT_EQ(w.grad_or_zeros(), (std::vector<double>{6, 6}));
  w.zero_grad();
  EXPECT_FALSE(w.has_grad());
}

TEST(Backward, ReusedIntermediateReceivesAllContributions) {
  Tensor x = Tensor::scalar(1.5, true);
  const Tensor y = x * x;
  (y * y + y).backward();  // d/dx (x^4 + x^2) = 4x^3 + 2x
  EXPECT_NEAR(x.grad()[0], 4 * 1.5 * 1.5 * 1.5 + 3.0, 1e-12);
}

TEST(Backward, LinearityOfGradients) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_matrix(rng, 3, 4);
    Tensor b = random_matrix(rng, 4, 2);
    auto l1 = [&] { return sum(tanh(matmul(a, b))); };
    auto l2 = [&] { return mean(square(matmul(a, b))) + std_dev(reshape(a, {12})); };
    l1().backward();
    l2().backward();
    const auto ga = a.grad_or_zeros(), gb = b.grad_or_zeros();
    a.zero_grad();
    b.zero_grad();
    (l1() + l2()).backward();
    for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(a.grad()[i], ga[i], 1e-12);
    for (std::size_t i = 0; i < gb.size(); ++i) EXPECT_NEAR(b.grad()[i], gb[i], 1e-12);
  }
}

TEST(Backward, CompositeFidelitySigmoidMatmulMatchesFiniteDifferences) {
  const auto results = run_gradcheck({.cases = 10, .seed = 5});
  bool found = false;
  for (const auto& r : results) {
    if (r.op == "composite_fidelity_sigmoid_matmul") {
      found = true;
      EXPECT_LT(r.max_relative_error, 1e-4);
    }
  }
  EXPECT_TRUE(found);
}

TEST(Backward, Determinism) {
  auto run = [] {
    Rng rng(42);
    Tensor a = random_matrix(rng, 5, 6);
    Tensor b = random_matrix(rng, 6, 3);
    const Tensor loss = sum(sigmoid(matmul(a, b)) * softplus(matmul(a, b)));
    loss.backward();
    std::vector<double> out = {loss.item()};
    for (double g : a.grad()) out.push_back(g);
    for (double g : b.grad()) out.push_back(g);
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(ShapeOps, SliceConcatStackElement) {
  const Tensor x = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(values(slice(x, 1, 3)), (std::vector<double>{3, 4, 5, 6}));
  EXPECT_EQ(values(concat({x, x}, 1)), (std::vector<double>{1, 2, 1, 2, 3, 4, 3, 4, 5, 6, 5, 6}));
  EXPECT_EQ(values(stack({element(x, 5), element(x, 0)})), (std::vector<double>{6, 1}));
  EXPECT_THROW(reshape(x, {4}), std::invalid_argument);
  EXPECT_THROW(slice(x, 2, 4), std::invalid_argument);
}

TEST(GradCheck, EveryOpPassesOnHundredSeededCases) {
  for (const auto& r : run_gradcheck({.cases = 100, .seed = 0})) {
    EXPECT_LT(r.max_relative_error, 1e-4) << r.op;
    EXPECT_TRUE(r.passed) << r.op;
  }
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_EQ(gradient_relative_error(2.0, 1.0), 0.5);
  EXPECT_NEAR(gradient_relative_error(0.0, 1e-9), 1e-5, 1e-18);
}
