#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "urie/ops.hpp"
#include "urie/sem.hpp"

namespace urie {
namespace {

using test::project;
using test::random_tensor;

void randomize(const Var& v, std::uint64_t seed, double lo, double hi) {
  Var copy = v;
  copy.mutable_value() = random_tensor(v.shape(), seed, lo, hi);
}

SemParams make_sem(int c_in, int c_out, int r, std::uint64_t seed, bool perturb = true) {
  Rng rng(seed);
  SemParams p = SemParams::init(c_in, c_out, r, NormKind::kInstance, NormKind::kBatch, rng);
  if (perturb) {
    std::uint64_t s = seed * 1000;
    for (auto* ns : {&p.norm_in, &p.norm_bn}) {
      randomize(ns->gamma, ++s, 0.5, 1.5);
      randomize(ns->beta, ++s, -0.3, 0.3);
    }
    for (auto* c : {&p.conv_in, &p.conv_bn}) randomize(c->bias, ++s, -0.2, 0.2);
    for (auto* l : {&p.fc1, &p.fc2_in, &p.fc2_bn}) randomize(l->bias, ++s, -0.2, 0.2);
  }
  return p;
}

void zero_fc(SemParams& p) {
  for (auto* l : {&p.fc1, &p.fc2_in, &p.fc2_bn}) {
    l->weight.mutable_value().fill(0.0);
    l->bias.mutable_value().fill(0.0);
  }
}

double leaky(double v) { return v >= 0 ? v : 0.01 * v; }

// Loop-level attention: pool, flatten channel-row-col, fc1, leaky, two heads,
// stabilized softmax.
Tensor attention_oracle(const Tensor& f_in, const Tensor& f_bn, const SemParams& p) {
  const Shape s = f_in.shape();
  const int ph = s.h / 4, pw = s.w / 4, flat = 16 * s.c;
  const int hidden = p.fc1.out();
  Tensor a_in({s.n, s.c, 4, 4});
  for (int n = 0; n < s.n; ++n) {
    std::vector<double> z(flat);
    for (int c = 0; c < s.c; ++c)
      for (int gy = 0; gy < 4; ++gy)
        for (int gx = 0; gx < 4; ++gx) {
          double acc = 0;
          for (int i = 0; i < ph; ++i)
            for (int j = 0; j < pw; ++j) {
              const int y = gy * ph + i, x = gx * pw + j;
              acc += f_in.at(n, c, y, x) + f_bn.at(n, c, y, x);
            }
          z[c * 16 + gy * 4 + gx] = acc / (ph * pw);
        }
    std::vector<double> h(hidden);
    for (int o = 0; o < hidden; ++o) {
      double acc = p.fc1.bias.value()[o];
      for (int i = 0; i < flat; ++i) acc += p.fc1.weight.value()[o * flat + i] * z[i];
      h[o] = leaky(acc);
    }
    for (int k = 0; k < flat; ++k) {
      double si = p.fc2_in.bias.value()[k], sb = p.fc2_bn.bias.value()[k];
      for (int o = 0; o < hidden; ++o) {
        si += p.fc2_in.weight.value()[k * hidden + o] * h[o];
        sb += p.fc2_bn.weight.value()[k * hidden + o] * h[o];
      }
      const double m = std::max(si, sb);
      const double ei = std::exp(si - m), eb = std::exp(sb - m);
      a_in[n * flat + k] = ei / (ei + eb);
    }
  }
  return a_in;
}

TEST(SemInit, ShapesAndNames) {
  SemParams p = make_sem(8, 12, 16, 1, false);
  EXPECT_EQ(p.c_in(), 8);
  EXPECT_EQ(p.c_out(), 12);
  EXPECT_EQ(p.conv_in.kernel.shape(), p.conv_bn.kernel.shape());
  EXPECT_EQ(p.fc1.weight.shape(), (Shape{12, 192, 1, 1}));
  EXPECT_EQ(p.fc2_in.weight.shape(), (Shape{192, 12, 1, 1}));
  EXPECT_EQ(p.norm_in.kind, NormKind::kInstance);
  EXPECT_EQ(p.norm_bn.kind, NormKind::kBatch);
  std::set<std::string> names;
  for (const auto& [name, var, trainable] : p.parameters()) names.insert(name);
  EXPECT_EQ(names.size(), p.parameters().size());
  for (double v : p.norm_in.gamma.value().values()) EXPECT_EQ(v, 1.0);
  for (double v : p.fc1.bias.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(SemInit, RejectsIndivisibleRatio) {
  Rng rng(0);
  EXPECT_THROW(SemParams::init(4, 3, 32, NormKind::kInstance, NormKind::kBatch, rng),
               ContractError);
  EXPECT_NO_THROW(SemParams::init(4, 3, 16, NormKind::kInstance, NormKind::kBatch, rng));
}

TEST(SemBranches, DeltaKernelsExposeNormalizations) {
  SemParams p = make_sem(3, 3, 3, 2, false);
  for (auto* c : {&p.conv_in, &p.conv_bn}) {
    Tensor k({3, 3, 3, 3});
    for (int i = 0; i < 3; ++i) k.at(i, i, 1, 1) = 1.0;
    c->kernel.mutable_value() = k;
  }
  Var x(random_tensor({2, 3, 8, 8}, 3));
  auto [f_in, f_bn] = sem_branches(x, p);
  NormState in = NormState::init(3, NormKind::kInstance);
  NormState bn = NormState::init(3, NormKind::kBatch);
  EXPECT_EQ(f_in.value(), leaky_relu(instance_norm(x, in)).value());
  EXPECT_EQ(f_bn.value(), leaky_relu(batch_norm(x, bn)).value());
}

TEST(SemBranches, ConstantInputCollapsesInstanceBranchToBias) {
  SemParams p = make_sem(2, 3, 3, 4, false);
  randomize(p.conv_in.bias, 5, -1, 1);
  auto [f_in, f_bn] = sem_branches(Var(Tensor({2, 2, 8, 8}, 0.6)), p);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 64; ++i) {
        EXPECT_NEAR(f_in.value()[(n * 3 + c) * 64 + i], p.conv_in.bias.value()[c], 1e-12);
      }
  EXPECT_THROW(sem_branches(Var(Tensor({2, 3, 8, 8})), p), ContractError);
}

TEST(SemAttention, ZeroFcGivesHalf) {
  SemParams p = make_sem(4, 4, 4, 6);
  zero_fc(p);
  Var x(random_tensor({2, 4, 8, 8}, 7));
  auto [f_in, f_bn] = sem_branches(x, p);
  const SemAttention att = sem_attention(f_in, f_bn, p);
  EXPECT_EQ(att.scores_in.value(), att.scores_bn.value());
  EXPECT_EQ(att.a_in.value(), Tensor({2, 4, 4, 4}, 0.5));
  EXPECT_EQ(att.a_bn.value(), Tensor({2, 4, 4, 4}, 0.5));
  Tensor expected = f_in.value();
  for (std::size_t i = 0; i < expected.size(); ++i) {
    expected[i] = 0.5 * f_in.value()[i] + 0.5 * f_bn.value()[i];
  }
  EXPECT_EQ(sem_forward(x, p).value(), expected);
}

TEST(SemAttention, LogThreeGapGivesThreeQuarters) {
  SemParams p = make_sem(2, 2, 2, 8);
  zero_fc(p);
  p.fc2_in.bias.mutable_value()[5] = std::log(3.0);
  Var x(random_tensor({2, 2, 8, 8}, 9));
  auto [f_in, f_bn] = sem_branches(x, p);
  const SemAttention att = sem_attention(f_in, f_bn, p);
  EXPECT_NEAR(att.a_in.value()[5], 0.75, 1e-15);
  EXPECT_NEAR(att.a_bn.value()[5], 0.25, 1e-15);
  EXPECT_EQ(att.a_in.value()[4], 0.5);
}

TEST(SemAttention, SaturatedBiasSelectsBranch) {
  SemParams p = make_sem(3, 4, 4, 10);
  zero_fc(p);
  p.fc2_in.bias.mutable_value().fill(50.0);
  p.fc2_bn.bias.mutable_value().fill(-50.0);
  Var x(random_tensor({2, 3, 8, 8}, 11));
  auto [f_in, f_bn] = sem_branches(x, p);
  EXPECT_LT(max_abs_diff(sem_forward(x, p).value(), f_in.value()), 1e-12);
}

TEST(SemAttention, SumsToOneOnRandomModules) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SemParams p = make_sem(3, 4, 2, 100 + seed);
    Var x(random_tensor({2, 3, 8, 8}, 200 + seed, -3, 3));
    auto [f_in, f_bn] = sem_branches(x, p);
    const SemAttention att = sem_attention(f_in, f_bn, p);
    EXPECT_EQ(att.a_in.shape(), (Shape{2, 4, 4, 4}));
    for (std::size_t i = 0; i < att.a_in.value().size(); ++i) {
      const double a = att.a_in.value()[i], b = att.a_bn.value()[i];
      EXPECT_LT(std::abs(a + b - 1.0), 1e-12);
      EXPECT_GT(a, 0.0);
      EXPECT_LT(a, 1.0);
    }
  }
}

TEST(SemAttention, MatchesLoopOracle) {
  SemParams p = make_sem(3, 5, 5, 12);
  Var x(random_tensor({2, 3, 8, 12}, 13));
  auto [f_in, f_bn] = sem_branches(x, p);
  const SemAttention att = sem_attention(f_in, f_bn, p);
  EXPECT_LT(max_abs_diff(att.a_in.value(), attention_oracle(f_in.value(), f_bn.value(), p)),
            1e-12);
}

TEST(SemAttention, FlattenIsChannelThenRowThenColumn) {
  // Route one pooled cell straight to score 0 and check which cell it is.
  SemParams p = make_sem(2, 2, 1, 14, false);
  zero_fc(p);
  p.fc1.weight.mutable_value()[0 * 32 + 17] = 1.0;  // hidden 0 <- flat 17
  p.fc2_in.weight.mutable_value()[0 * 32 + 0] = 1.0;  // score 0 <- hidden 0
  Tensor f({1, 2, 8, 8});
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) f.at(0, c, y, x) = 1 + c * 16 + (y / 2) * 4 + (x / 2);
  const SemAttention att = sem_attention(Var(f), Var(Tensor(f.shape())), p);
  // Flat 17 is channel 1, row 0, column 1, whose cell value is 1 + 16 + 1.
  EXPECT_EQ(att.scores_in.value()[0], 18.0);
}

TEST(SemAttention, RaisingScoresRaisesSelection) {
  SemParams p = make_sem(2, 4, 4, 15);
  Var x(random_tensor({2, 2, 8, 8}, 16));
  auto [f_in, f_bn] = sem_branches(x, p);
  const Tensor before = sem_attention(f_in, f_bn, p).a_in.value();
  for (double& b : p.fc2_in.bias.mutable_value().values()) b += 0.3;
  const Tensor after = sem_attention(f_in, f_bn, p).a_in.value();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_GT(after[i], before[i]);
}

TEST(SemForward, ShapeAndBlendOracle) {
  SemParams p = make_sem(3, 6, 3, 17);
  Var x(random_tensor({2, 3, 16, 8}, 18));
  const Tensor y = sem_forward(x, p).value();
  EXPECT_EQ(y.shape(), (Shape{2, 6, 16, 8}));

  auto [f_in, f_bn] = sem_branches(x, p);
  const Tensor a = attention_oracle(f_in.value(), f_bn.value(), p);
  const Tensor up = bilinear_resize(Var(a), 16, 8).value();
  Tensor expected(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    expected[i] = up[i] * f_in.value()[i] + (1.0 - up[i]) * f_bn.value()[i];
  }
  EXPECT_LT(max_abs_diff(y, expected), 1e-12);
}

TEST(SemForward, GradCheckAllParameters) {
  SemParams p = make_sem(2, 4, 4, 19);
  Var x(random_tensor({2, 2, 8, 8}, 20), true);
  std::vector<Var> inputs{x};
  for (const auto& [name, var, trainable] : p.parameters()) {
    if (trainable) inputs.push_back(var);
  }
  const double err = grad_check([&] { return project(sem_forward(x, p)); }, inputs);
  EXPECT_LT(err, 1e-6);
}

TEST(SemForward, EvalModeIsPerSample) {
  SemParams p = make_sem(2, 4, 4, 21);
  p.set_mode(NormMode::kEval);
  const Tensor a = random_tensor({1, 2, 8, 8}, 22), b = random_tensor({1, 2, 8, 8}, 23);
  std::vector<Tensor> ab{a, b};
  const Tensor y = sem_forward(Var(stack(ab)), p).value();
  EXPECT_LT(max_abs_diff(y.samples(1, 1), sem_forward(Var(b), p).value()), 1e-12);
}

}  // namespace
}  // namespace urie
