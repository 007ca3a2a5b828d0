#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <set>

#include "test_util.hpp"
#include "urie/checkpoint.hpp"
#include "urie/urie_net.hpp"

namespace urie {
namespace {

using test::project;
using test::random_tensor;

UrieConfig config(NormVariant v = NormVariant::kBoth) {
  UrieConfig c;
  c.norm_mode = v;
  return c;
}

// Per-layer multiply-accumulate table for an h x w input, written out the
// way one would fill a spreadsheet: one row per conv or FC layer.
std::uint64_t mac_spreadsheet(std::uint64_t h, std::uint64_t w) {
  const std::uint64_t full = h * w, half = (h / 2) * (w / 2), quarter = (h / 4) * (w / 4);
  struct Row {
    std::uint64_t k, c_in, c_out, positions;
  };
  const Row rows[] = {
      {9, 3, 32, full},        // stem
      {3, 32, 64, half},       // sem1 conv_in
      {3, 32, 64, half},       // sem1 conv_bn
      {1, 1024, 64, 1},        // sem1 fc1
      {1, 64, 1024, 1},        // sem1 fc2_in
      {1, 64, 1024, 1},        // sem1 fc2_bn
      {3, 64, 64, quarter},    // sem2 conv_in
      {3, 64, 64, quarter},    // sem2 conv_bn
      {1, 1024, 64, 1},        // sem2 fc1
      {1, 64, 1024, 1},        // sem2 fc2_in
      {1, 64, 1024, 1},        // sem2 fc2_bn
      {3, 128, 32, half},      // sem3 conv_in
      {3, 128, 32, half},      // sem3 conv_bn
      {1, 512, 32, 1},         // sem3 fc1
      {1, 32, 512, 1},         // sem3 fc2_in
      {1, 32, 512, 1},         // sem3 fc2_bn
      {3, 64, 16, full},       // sem4 conv_in
      {3, 64, 16, full},       // sem4 conv_bn
      {1, 256, 16, 1},         // sem4 fc1
      {1, 16, 256, 1},         // sem4 fc2_in
      {1, 16, 256, 1},         // sem4 fc2_bn
      {3, 16, 3, full},        // head
  };
  std::uint64_t total = 0;
  for (const Row& r : rows) total += r.k * r.k * r.c_in * r.c_out * r.positions;
  return total;
}

TEST(MacCount, StemTermAndSpreadsheet) {
  EXPECT_EQ(9ull * 9 * 3 * 32 * 224 * 224, 390168576ull);
  EXPECT_EQ(256ull * 16, 4096ull);
  EXPECT_EQ(mac_spreadsheet(224, 224), 2955620352ull);
  EXPECT_EQ(mac_count(config(), 224, 224), mac_spreadsheet(224, 224));
  EXPECT_EQ(mac_count(config(), 32, 32), mac_spreadsheet(32, 32));
  EXPECT_EQ(mac_count(config(), 64, 48), mac_spreadsheet(64, 48));
}

TEST(MacCount, IndependentOfNormVariant) {
  const auto both = mac_count(config(NormVariant::kBoth), 224, 224);
  EXPECT_EQ(mac_count(config(NormVariant::kBatchOnly), 224, 224), both);
  EXPECT_EQ(mac_count(config(NormVariant::kInstanceOnly), 224, 224), both);
}

TEST(UrieConfig, FingerprintRoundTrip) {
  for (auto v : {NormVariant::kBoth, NormVariant::kBatchOnly, NormVariant::kInstanceOnly}) {
    UrieConfig c = config(v);
    c.reduction_ratio = 8;
    c.residual_skip = v != NormVariant::kBoth;
    const UrieConfig back = UrieConfig::from_fingerprint(c.fingerprint());
    EXPECT_EQ(back.norm_mode, c.norm_mode);
    EXPECT_EQ(back.reduction_ratio, 8);
    EXPECT_EQ(back.residual_skip, c.residual_skip);
  }
  EXPECT_EQ(config().fingerprint(), "urie/v1;norm=both;r=16;skip=1");
  EXPECT_THROW(UrieConfig::from_fingerprint("clf/v1;classes=4"), ContractError);
  EXPECT_EQ(parse_norm_variant("bn_only"), NormVariant::kBatchOnly);
  EXPECT_EQ(parse_norm_variant("in"), NormVariant::kInstanceOnly);
  EXPECT_THROW(parse_norm_variant("group"), ContractError);
}

TEST(UrieParams, NamesUniqueAndIdenticalAcrossVariants) {
  std::vector<std::vector<std::string>> name_lists;
  std::vector<std::size_t> counts;
  for (auto v : {NormVariant::kBoth, NormVariant::kBatchOnly, NormVariant::kInstanceOnly}) {
    UrieParams p = UrieParams::init(config(v), 1);
    std::vector<std::string> names;
    std::size_t scalars = 0;
    for (const auto& np : p.named_parameters()) {
      names.push_back(np.name);
      if (np.trainable) scalars += np.var.value().size();
    }
    EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
    std::sort(names.begin(), names.end());
    name_lists.push_back(names);
    counts.push_back(scalars);
  }
  EXPECT_EQ(name_lists[0], name_lists[1]);
  EXPECT_EQ(name_lists[0], name_lists[2]);
  EXPECT_EQ(counts[0], counts[1]);
  EXPECT_EQ(counts[0], counts[2]);
}

TEST(UrieParams, NormKindsFollowVariant) {
  EXPECT_EQ(UrieParams::init(config(), 1).sem1.norm_in.kind, NormKind::kInstance);
  EXPECT_EQ(UrieParams::init(config(), 1).sem1.norm_bn.kind, NormKind::kBatch);
  auto bn = UrieParams::init(config(NormVariant::kBatchOnly), 1);
  EXPECT_EQ(bn.sem3.norm_in.kind, NormKind::kBatch);
  auto in = UrieParams::init(config(NormVariant::kInstanceOnly), 1);
  EXPECT_EQ(in.sem4.norm_bn.kind, NormKind::kInstance);
}

TEST(UrieForward, ShapePreservedForValidSizes) {
  UrieParams p = UrieParams::init(config(), 2);
  for (auto [h, w] : {std::pair{16, 16}, {32, 32}, {48, 32}, {16, 64}}) {
    Var x(random_tensor({2, 3, h, w}, 3, 0, 1));
    const Tensor y = urie_forward(x, p, config()).value();
    EXPECT_EQ(y.shape(), x.shape());
    for (double v : y.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(UrieForward, RejectsInvalidInput) {
  UrieParams p = UrieParams::init(config(), 2);
  EXPECT_THROW(urie_forward(Var(Tensor({2, 3, 24, 32})), p, config()), ContractError);
  EXPECT_THROW(urie_forward(Var(Tensor({2, 1, 32, 32})), p, config()), ContractError);
}

TEST(UrieForward, ZeroHeadIsExactIdentity) {
  UrieParams p = UrieParams::init(config(), 4, HeadInit::kZero);
  const Tensor x = random_tensor({2, 3, 32, 32}, 5, 0, 1);
  EXPECT_EQ(urie_forward(Var(x), p, config()).value(), x);
  UrieParams q = UrieParams::init(config(), 4);
  EXPECT_NE(urie_forward(Var(x), q, config()).value(), x);
  q.zero_head();
  EXPECT_EQ(urie_forward(Var(x), q, config()).value(), x);
}

TEST(UrieForward, EvalModePermutationEquivariance) {
  UrieParams p = UrieParams::init(config(), 6);
  p.set_mode(NormMode::kEval);
  const Tensor a = random_tensor({1, 3, 16, 16}, 7, 0, 1);
  const Tensor b = random_tensor({1, 3, 16, 16}, 8, 0, 1);
  std::vector<Tensor> ab{a, b}, ba{b, a};
  const Tensor yab = urie_forward(Var(stack(ab)), p, config()).value();
  const Tensor yba = urie_forward(Var(stack(ba)), p, config()).value();
  EXPECT_LT(max_abs_diff(yab.samples(0, 1), yba.samples(1, 1)), 1e-12);
  EXPECT_LT(max_abs_diff(yab.samples(1, 1), yba.samples(0, 1)), 1e-12);
}

TEST(UrieForward, GradCheckInputAndAllParameters) {
  UrieParams p = UrieParams::init(config(), 9);
  Var x(random_tensor({2, 3, 16, 16}, 10, 0.3, 0.7), true);
  std::vector<Var> inputs{x};
  for (const auto& np : p.named_parameters()) {
    if (np.trainable) inputs.push_back(np.var);
  }
  // A 1e-5 step can cross one of the many internal leaky ReLU kinks.
  GradCheckOptions opts;
  opts.eps = 1e-6;
  opts.max_coords_per_input = 4;
  opts.seed = 11;
  EXPECT_LT(grad_check([&] { return project(urie_forward(x, p, config())); }, inputs, opts),
            1e-4);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  UrieConfig cfg = config();
  UrieParams p = UrieParams::init(cfg, 12);
  p.set_mode(NormMode::kTrain);
  urie_forward(Var(random_tensor({2, 3, 16, 16}, 13, 0, 1)), p, cfg);  // move running stats
  const Checkpoint ck = snapshot(p.named_parameters(), cfg.fingerprint());
  const std::string bytes = serialize_checkpoint(ck);
  EXPECT_EQ(serialize_checkpoint(parse_checkpoint(bytes)), bytes);

  UrieParams q = UrieParams::init(cfg, 99);
  restore(q.named_parameters(), parse_checkpoint(bytes), cfg.fingerprint());
  p.set_mode(NormMode::kEval);
  q.set_mode(NormMode::kEval);
  const Tensor x = random_tensor({2, 3, 32, 32}, 14, 0, 1);
  EXPECT_EQ(urie_forward(Var(x), p, cfg).value(), urie_forward(Var(x), q, cfg).value());

  const auto dir = test::temp_dir("ckpt");
  write_checkpoint(dir / "m.ckpt", ck);
  EXPECT_EQ(serialize_checkpoint(read_checkpoint(dir / "m.ckpt")), bytes);
}

TEST(Checkpoint, PreservesSpecialValuesBitwise) {
  Checkpoint ck;
  ck.fingerprint = "test";
  Tensor t({1, 1, 1, 5}, {-0.0, 5e-324, 1e308, -INFINITY, std::nan("7")});
  ck.entries.push_back({"t", t});
  const Checkpoint back = parse_checkpoint(serialize_checkpoint(ck));
  EXPECT_EQ(std::memcmp(back.entries[0].second.data(), t.data(), 5 * sizeof(double)), 0);
}

TEST(Checkpoint, FingerprintEnforced) {
  UrieConfig bn = config(NormVariant::kBatchOnly);
  UrieParams p = UrieParams::init(bn, 15);
  const Checkpoint ck = snapshot(p.named_parameters(), bn.fingerprint());
  UrieParams q = UrieParams::init(config(), 16);
  EXPECT_THROW(restore(q.named_parameters(), ck, config().fingerprint()), CheckpointError);
  UrieParams r = UrieParams::init(bn, 16);
  EXPECT_NO_THROW(restore(r.named_parameters(), ck, bn.fingerprint()));
}

TEST(Checkpoint, MalformedInputRejected) {
  UrieParams p = UrieParams::init(config(), 17);
  const std::string bytes = serialize_checkpoint(snapshot(p.named_parameters(), "fp"));
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  EXPECT_THROW(parse_checkpoint(bytes + "x"), CheckpointError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bad), CheckpointError);
  EXPECT_THROW(read_checkpoint("/nonexistent/file.ckpt"), CheckpointError);

  Checkpoint ck = snapshot(p.named_parameters(), "fp");
  ck.entries.pop_back();
  EXPECT_THROW(restore(p.named_parameters(), ck, "fp"), CheckpointError);
  ck = snapshot(p.named_parameters(), "fp");
  ck.entries[0].second = Tensor({1, 1, 1, 1});
  EXPECT_THROW(restore(p.named_parameters(), ck, "fp"), CheckpointError);
}

}  // namespace
}  // namespace urie
