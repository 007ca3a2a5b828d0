#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "urie/corruptions.hpp"
#include "urie/ops.hpp"
#include "urie/recognizer.hpp"

namespace urie {
namespace {

using test::random_tensor;

Var logits_of(std::vector<double> v, int k) {
  const int n = static_cast<int>(v.size()) / k;
  return Var(Tensor({n, k, 1, 1}, std::move(v)), true);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  const std::vector<int> labels{0, 3};
  EXPECT_NEAR(cross_entropy(logits_of(std::vector<double>(8, 0.7), 4), labels).value()[0],
              std::log(4.0), 1e-15);
  EXPECT_NEAR(std::log(4.0), 1.3863, 1e-4);
}

TEST(CrossEntropy, SaturatedTrueClassGivesZero) {
  const std::vector<int> labels{1};
  const double loss = cross_entropy(logits_of({0, 50, 0}, 3), labels).value()[0];
  EXPECT_GE(loss, 0.0);
  EXPECT_LT(loss, 1e-20);
  const double huge = cross_entropy(logits_of({1000, -1000, 0}, 3), labels).value()[0];
  EXPECT_NEAR(huge, 2000.0, 1e-9);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Var z = logits_of({0.2, -1.0, 0.5, 1.5, 0.0, -0.5}, 3);
  const std::vector<int> labels{2, 0};
  backward(cross_entropy(z, labels));
  for (int n = 0; n < 2; ++n) {
    double denom = 0;
    for (int k = 0; k < 3; ++k) denom += std::exp(z.value()[n * 3 + k]);
    for (int k = 0; k < 3; ++k) {
      const double p = std::exp(z.value()[n * 3 + k]) / denom;
      const double expect = (p - (k == labels[n] ? 1.0 : 0.0)) / 2.0;
      EXPECT_NEAR(z.grad()[n * 3 + k], expect, 1e-15);
    }
  }
  const Tensor x = random_tensor({4, 5, 1, 1}, 1, -2, 2);
  const std::vector<int> l4{0, 4, 2, 2};
  EXPECT_LT(grad_check([&](const Var& v) { return cross_entropy(v, l4); }, x), 1e-6);
}

TEST(CrossEntropy, RejectsBadLabels) {
  const std::vector<int> bad{3};
  EXPECT_THROW(cross_entropy(logits_of({0, 0, 0}, 3), bad), ContractError);
  const std::vector<int> one{0};
  EXPECT_THROW(cross_entropy(logits_of({0}, 1), one), ContractError);
  const std::vector<int> two{0, 1};
  EXPECT_THROW(cross_entropy(logits_of({0, 0, 0}, 3), two), ContractError);
}

TEST(ToyDatasetTest, DeterministicBalancedAndInRange) {
  const ToyDataset a = build_toy_dataset(5, 6, 5, Split::kTrain);
  const ToyDataset b = build_toy_dataset(5, 6, 5, Split::kTrain);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.images.shape(), (Shape{30, 3, 32, 32}));
  std::vector<int> counts(5);
  for (int l : a.labels) ++counts[l];
  for (int c : counts) EXPECT_EQ(c, 6);
  for (double v : a.images.values()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  EXPECT_NE(build_toy_dataset(5, 6, 5, Split::kTest).images, a.images);
  EXPECT_NE(build_toy_dataset(6, 6, 5, Split::kTrain).images, a.images);
  EXPECT_THROW(build_toy_dataset(1, 2, 1), ContractError);
  EXPECT_THROW(build_toy_dataset(1, 2, 9), ContractError);
}

TEST(ToyDatasetTest, SubsetKeepsOrder) {
  const ToyDataset ds = build_toy_dataset(5, 2, 4);
  const std::vector<int> idx{6, 1};
  const ToyDataset sub = ds.subset(idx);
  EXPECT_EQ(sub.size(), 2);
  EXPECT_EQ(sub.image(0), ds.image(6));
  EXPECT_EQ(sub.labels, (std::vector<int>{ds.labels[6], ds.labels[1]}));
}

TEST(ToyDatasetTest, NearestCentroidBeatsChance) {
  const int k = 8;
  const ToyDataset train = build_toy_dataset(2, 32, k, Split::kTrain);
  const ToyDataset test = build_toy_dataset(2, 16, k, Split::kTest);
  const std::size_t dim = 3 * 32 * 32;
  std::vector<std::vector<double>> centroid(k, std::vector<double>(dim));
  for (int i = 0; i < train.size(); ++i)
    for (std::size_t d = 0; d < dim; ++d) centroid[train.labels[i]][d] += train.images[i * dim + d] / 32;
  int correct = 0;
  for (int i = 0; i < test.size(); ++i) {
    int best = 0;
    double best_dist = INFINITY;
    for (int c = 0; c < k; ++c) {
      double dist = 0;
      for (std::size_t d = 0; d < dim; ++d) dist += std::pow(test.images[i * dim + d] - centroid[c][d], 2);
      if (dist < best_dist) best_dist = dist, best = c;
    }
    correct += best == test.labels[i];
  }
  EXPECT_GT(static_cast<double>(correct) / test.size(), 1.0 / k + 0.05);
}

// Two classes of soft blobs: warm on the left half, cool on the right.
ToyDataset blob_dataset(int n_per_class, std::uint64_t seed) {
  Rng rng(seed);
  ToyDataset ds;
  ds.classes = 2;
  ds.images = Tensor({2 * n_per_class, 3, 32, 32});
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const int label = i % 2;
    ds.labels.push_back(label);
    const double cx = label == 0 ? rng.uniform(6, 12) : rng.uniform(20, 26);
    const double cy = rng.uniform(8, 24), r = rng.uniform(3, 6);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const double b = std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * r * r));
        ds.images.at(i, 0, y, x) = 0.2 + 0.7 * b * (label == 0 ? 1.0 : 0.3);
        ds.images.at(i, 1, y, x) = 0.2 + 0.3 * b;
        ds.images.at(i, 2, y, x) = 0.2 + 0.7 * b * (label == 0 ? 0.3 : 1.0);
      }
  }
  return ds;
}

TEST(Pretrain, SeparableBlobsReachFullTrainAccuracy) {
  const ToyDataset ds = blob_dataset(16, 3);
  PretrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 4;
  PretrainResult result;
  TinyClassifier clf = pretrain_classifier(ds, cfg, &result);
  EXPECT_EQ(result.train_accuracy, 1.0);
  EXPECT_EQ(result.epoch_loss.size(), 20u);
  EXPECT_TRUE(clf.frozen());
}

class PretrainedClassifier : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    train_ = new ToyDataset(build_toy_dataset(11, 32, 4, Split::kTrain));
    PretrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 12;
    clf_ = new TinyClassifier(pretrain_classifier(*train_, cfg, &result_));
  }
  static void TearDownTestSuite() {
    delete clf_;
    delete train_;
  }
  static ToyDataset* train_;
  static TinyClassifier* clf_;
  static PretrainResult result_;
};
ToyDataset* PretrainedClassifier::train_ = nullptr;
TinyClassifier* PretrainedClassifier::clf_ = nullptr;
PretrainResult PretrainedClassifier::result_;

TEST_F(PretrainedClassifier, ReachesHighTrainAccuracy) {
  EXPECT_GE(result_.train_accuracy, 0.95);
  EXPECT_DOUBLE_EQ(accuracy(predict(*clf_, train_->images), train_->labels),
                   result_.train_accuracy);
}

TEST_F(PretrainedClassifier, SameSeedSameParameters) {
  PretrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 12;
  TinyClassifier again = pretrain_classifier(*train_, cfg);
  const auto a = clf_->named_parameters(), b = again.named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].var.value(), b[i].var.value()) << a[i].name;
  }
}

TEST_F(PretrainedClassifier, CorruptedCopiesScoreLower) {
  Rng rng(13);
  Tensor corrupted = train_->images;
  std::vector<Tensor> imgs;
  for (int i = 0; i < train_->size(); ++i) {
    imgs.push_back(corrupt(train_->image(i), sample_spec(rng, CorruptionPool::kSeen, false)));
  }
  const double clean = accuracy(predict(*clf_, train_->images), train_->labels);
  const double dirty = accuracy(predict(*clf_, stack(imgs)), train_->labels);
  EXPECT_LT(dirty, clean);
}

TEST_F(PretrainedClassifier, FrozenParametersGetNoGradientButInputDoes) {
  for (const auto& p : clf_->named_parameters()) EXPECT_FALSE(p.var.requires_grad()) << p.name;
  Var x(train_->images.samples(0, 4), true);
  const std::vector<int> labels(train_->labels.begin(), train_->labels.begin() + 4);
  backward(cross_entropy(clf_->forward(x), labels));
  double norm = 0;
  for (double g : x.grad().values()) norm += g * g;
  EXPECT_GT(norm, 0.0);
  for (const auto& p : clf_->named_parameters()) EXPECT_FALSE(p.var.has_grad()) << p.name;
}

TEST_F(PretrainedClassifier, CheckpointReproducesLogits) {
  const Checkpoint ck = snapshot(clf_->named_parameters(), clf_->fingerprint());
  EXPECT_EQ(clf_->fingerprint(), "clf/v1;classes=4");
  TinyClassifier back = TinyClassifier::from_checkpoint(parse_checkpoint(serialize_checkpoint(ck)));
  EXPECT_TRUE(back.frozen());
  EXPECT_EQ(back.classes(), 4);
  NoGradGuard guard;
  const Tensor x = train_->images.samples(0, 8);
  EXPECT_EQ(back.forward(Var(x)).value(), clf_->forward(Var(x)).value());

  Checkpoint wrong = ck;
  wrong.fingerprint = "urie/v1;norm=both;r=16;skip=1";
  EXPECT_THROW(TinyClassifier::from_checkpoint(wrong), CheckpointError);
}

TEST_F(PretrainedClassifier, PredictIndependentOfChunking) {
  EXPECT_EQ(predict(*clf_, train_->images, 7), predict(*clf_, train_->images, 64));
}

TEST(Accuracy, CountsMatches) {
  const std::vector<int> p{0, 1, 2, 3}, l{0, 1, 0, 0};
  EXPECT_DOUBLE_EQ(accuracy(p, l), 0.5);
  const std::vector<int> short_l{0};
  EXPECT_THROW(accuracy(p, short_l), ContractError);
}

}  // namespace
}  // namespace urie
