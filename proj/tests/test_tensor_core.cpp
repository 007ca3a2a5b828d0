#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "test_util.hpp"
#include "urie/autograd.hpp"
#include "urie/ops.hpp"
#include "urie/rng.hpp"
#include "urie/tensor.hpp"

namespace urie {
namespace {

using test::random_tensor;

Tensor row(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor({1, 1, 1, n}, std::move(v));
}

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.shape().plane(), 20u);
  t.at(1, 2, 3, 4) = 7.0;
  EXPECT_EQ(t[119], 7.0);
  EXPECT_EQ(t.offset(1, 0, 0, 0), 60u);
  EXPECT_EQ(t.offset(0, 1, 0, 0), 20u);
  EXPECT_EQ(t.offset(0, 0, 1, 0), 5u);
}

TEST(Tensor, RejectsBadData) {
  EXPECT_THROW(Tensor({1, 1, 2, 2}, std::vector<double>{1, 2, 3}), ContractError);
  EXPECT_THROW(Tensor({1, -1, 2, 2}), ContractError);
  Tensor t({1, 2, 2, 2});
  EXPECT_THROW(t.reshaped({1, 1, 1, 7}), ContractError);
  EXPECT_THROW(t.samples(0, 2), ContractError);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor t = random_tensor({2, 3, 2, 2}, 1);
  Tensor r = t.reshaped({6, 4, 1, 1});
  EXPECT_EQ(r.shape(), (Shape{6, 4, 1, 1}));
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], r[i]);
}

TEST(Tensor, SamplesAndStackRoundTrip) {
  Tensor t = random_tensor({3, 2, 2, 2}, 2);
  std::vector<Tensor> parts{t.samples(0, 1), t.samples(1, 1), t.samples(2, 1)};
  EXPECT_EQ(stack(parts), t);
  std::vector<Tensor> bad{Tensor({1, 2, 2, 2}), Tensor({1, 2, 2, 3})};
  EXPECT_THROW(stack(bad), ContractError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({1, 1, 1, 3}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  t[1] = INFINITY;
  EXPECT_FALSE(t.all_finite());
}

TEST(Rng, MatchesStandardEngineReference) {
  // The standard fixes the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  EXPECT_EQ(x, 9981545732273789042ull);
  EXPECT_STREQ(Rng::kAlgorithm, "mt19937_64");
}

TEST(Rng, SameSeedSameSequenceDifferentSeedDiffers) {
  Rng a(42), b(42), c(43);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    any_diff |= va != c.next_u64();
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, UniformMatchesTopBitsFormula) {
  Rng a(9);
  std::mt19937_64 ref(9);
  for (int i = 0; i < 100; ++i) {
    const double expected = static_cast<double>(ref() >> 11) / 9007199254740992.0;
    EXPECT_EQ(a.uniform(), expected);
  }
}

TEST(Rng, BelowIsInRangeAndRoughlyUniform) {
  Rng rng(3);
  std::array<int, 7> counts{};
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += std::pow(c - draws / 7.0, 2) / (draws / 7.0);
  EXPECT_LT(chi2, 22.46);  // p = 0.001 at 6 degrees of freedom
  EXPECT_THROW(rng.below(0), ContractError);
}

TEST(Rng, NormalMoments) {
  Rng rng(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(s2 / n - mean * mean, 1.0, 0.015);
}

TEST(Ops, AddExamples) {
  Tensor t = random_tensor({1, 2, 3, 3}, 4);
  EXPECT_EQ(ew_add(Var(Tensor::zeros(t.shape())), Var(t)).value(), t);
  Tensor neg = t;
  for (double& v : neg.values()) v = -v;
  EXPECT_EQ(ew_add(Var(t), Var(neg)).value(), Tensor::zeros(t.shape()));
  EXPECT_EQ(ew_add(Var(row({1, 2})), Var(row({3, 4}))).value(), row({4, 6}));
  EXPECT_THROW(ew_add(Var(row({1, 2})), Var(row({1, 2, 3}))), ContractError);
}

TEST(Ops, MulExamples) {
  Tensor t = random_tensor({1, 2, 3, 3}, 5);
  EXPECT_EQ(ew_mul(Var(Tensor::ones(t.shape())), Var(t)).value(), t);
  EXPECT_EQ(ew_mul(Var(Tensor::zeros(t.shape())), Var(t)).value(), Tensor::zeros(t.shape()));
  EXPECT_EQ(ew_mul(Var(row({2, 3})), Var(row({4, 5}))).value(), row({8, 15}));
}

TEST(Ops, AddAndMulCommute) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Var a(random_tensor({2, 3, 4, 4}, seed));
    Var b(random_tensor({2, 3, 4, 4}, seed + 100));
    EXPECT_EQ(ew_add(a, b).value(), ew_add(b, a).value());
    EXPECT_EQ(ew_mul(a, b).value(), ew_mul(b, a).value());
  }
}

TEST(Ops, LeakyReluExamples) {
  Var x(row({5, -2, 0}));
  const Tensor y = leaky_relu(x, 0.01).value();
  EXPECT_EQ(y[0], 5.0);
  EXPECT_DOUBLE_EQ(y[1], -0.02);
  EXPECT_EQ(y[2], 0.0);
  EXPECT_THROW(leaky_relu(x, -0.1), ContractError);
}

TEST(Ops, LeakyReluSubgradientAtZeroIsOne) {
  Var x(row({0.0}), true);
  backward(sum(leaky_relu(x)));
  EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Ops, ClampValuesAndGradient) {
  Var x(row({-0.5, 0.0, 0.3, 1.0, 1.5}), true);
  Var y = clamp(x, 0.0, 1.0);
  EXPECT_EQ(y.value(), row({0.0, 0.0, 0.3, 1.0, 1.0}));
  backward(sum(y));
  EXPECT_EQ(x.grad(), row({0.0, 1.0, 1.0, 1.0, 0.0}));
}

TEST(Ops, PairwiseSoftmaxAnalytic) {
  Var a(row({std::log(3.0), 0.0, 800.0}));
  Var b(row({0.0, 0.0, -800.0}));
  auto [pa, pb] = pairwise_softmax(a, b);
  EXPECT_NEAR(pa.value()[0], 0.75, 1e-15);
  EXPECT_NEAR(pb.value()[0], 0.25, 1e-15);
  EXPECT_EQ(pa.value()[1], 0.5);
  EXPECT_EQ(pa.value()[2], 1.0);
  EXPECT_EQ(pb.value()[2], 0.0);
  EXPECT_TRUE(pa.value().all_finite());
}

TEST(Ops, MseAndReductions) {
  Var a(row({1, 2, 3, 4}));
  Var b(row({1, 0, 3, 0}));
  EXPECT_DOUBLE_EQ(mse(a, b).value()[0], (4.0 + 16.0) / 4.0);
  EXPECT_DOUBLE_EQ(sum(a).value()[0], 10.0);
  EXPECT_DOUBLE_EQ(mean(a).value()[0], 2.5);
}

TEST(Autograd, SharedInputAccumulates) {
  Var x(row({3.0, -2.0}), true);
  backward(sum(ew_mul(x, x)));
  EXPECT_EQ(x.grad(), row({6.0, -4.0}));
}

TEST(Autograd, DiamondGraph) {
  // y = (x + x*2) * x = 3x^2, dy/dx = 6x
  Var x(row({1.5}), true);
  Var y = ew_mul(ew_add(x, scale(x, 2.0)), x);
  backward(sum(y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 9.0);
}

TEST(Autograd, NoGradGuardBuildsConstants) {
  Var x(row({1.0, 2.0}), true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    Var y = ew_mul(x, x);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(ew_mul(x, x).requires_grad());
}

TEST(Autograd, BackwardNeedsScalarWithoutSeed) {
  Var x(row({1.0, 2.0}), true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
  backward(scale(x, 2.0), row({1.0, 10.0}));
  EXPECT_EQ(x.grad(), row({2.0, 20.0}));
}

TEST(GradCheck, SumOfSquares) {
  const Tensor x = random_tensor({1, 2, 3, 3}, 6);
  EXPECT_LT(grad_check([](const Var& v) { return sum(square(v)); }, x), 1e-6);
}

TEST(GradCheck, LinearIsExact) {
  const Tensor x = random_tensor({1, 1, 4, 4}, 7);
  EXPECT_LT(grad_check([](const Var& v) { return sum(v); }, x), 1e-9);
}

TEST(GradCheck, LeakyReluAwayFromKink) {
  const Tensor x = test::away_from_zero(random_tensor({1, 2, 4, 4}, 8));
  EXPECT_LT(grad_check([](const Var& v) { return sum(leaky_relu(v)); }, x), 1e-6);
}

TEST(GradCheck, ElementwiseOps) {
  const Tensor a = random_tensor({1, 2, 3, 3}, 9);
  const Tensor b = random_tensor({1, 2, 3, 3}, 10, 0.5, 2.0);
  Var va(a, true), vb(b, true);
  auto check = [&](auto op) {
    return grad_check([&] { return test::project(op(va, vb)); }, {va, vb});
  };
  EXPECT_LT(check([](const Var& x, const Var& y) { return ew_add(x, y); }), 1e-6);
  EXPECT_LT(check([](const Var& x, const Var& y) { return ew_sub(x, y); }), 1e-6);
  EXPECT_LT(check([](const Var& x, const Var& y) { return ew_mul(x, y); }), 1e-6);
  EXPECT_LT(check([](const Var& x, const Var& y) { return ew_div(x, y); }), 1e-6);
  EXPECT_LT(check([](const Var& x, const Var& y) { return mse(x, y); }), 1e-6);
  EXPECT_LT(check([](const Var& x, const Var& y) {
              auto [p, q] = pairwise_softmax(x, y);
              return ew_add(p, scale(q, 3.0));
            }),
            1e-6);
}

TEST(GradCheck, DetectsWrongBackward) {
  const Tensor x = random_tensor({1, 1, 2, 2}, 11);
  auto broken = [](const Var& v) {
    Tensor out = v.value();
    for (double& e : out.values()) e = e * e;
    Var y = Var::make(out, {v}, [v](const Tensor& g) mutable {
      v.node()->accumulate(g);  // should be 2x * g
    });
    return sum(y);
  };
  EXPECT_GT(grad_check(broken, x), 0.1);
}

TEST(GradCheck, RestoresRequiresGrad) {
  Var a(random_tensor({1, 1, 2, 2}, 12), false);
  grad_check([&] { return sum(square(a)); }, {a});
  EXPECT_FALSE(a.requires_grad());
}

}  // namespace
}  // namespace urie
