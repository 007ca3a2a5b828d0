#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "urie/checkpoint.hpp"
#include "urie/layers.hpp"

namespace urie {

enum class Split { kTrain, kTest };

/// Labelled images of shape (n, 3, h, w) in [0, 1].
struct ToyDataset {
  Tensor images;
  std::vector<int> labels;
  int classes = 0;
  Split split = Split::kTrain;

  int size() const { return images.shape().n; }
  Tensor image(int i) const { return images.samples(i, 1); }
  /// Samples at the given indices, in order.
  ToyDataset subset(std::span<const int> indices) const;
};

inline constexpr int kToyImageSize = 32;
inline constexpr int kMaxToyClasses = 8;

/// Procedural 3x32x32 images: a class-specific silhouette (disk, square,
/// diamond or wide ellipse, hollow for classes 4..7) filled with a
/// class-specific texture over a dark flat background. Colours, stripe
/// period, phase, position and size are jittered per sample. Labels cycle
/// through the classes, so each class has exactly n_per_class samples.
ToyDataset build_toy_dataset(std::uint64_t seed, int n_per_class, int classes,
                             Split split = Split::kTrain);

/// Mean over the batch of -log softmax(logits)[label], computed with the
/// log-sum-exp shift. logits: (n, k, 1, 1) with k >= 2.
Var cross_entropy(const Var& logits, std::span<const int> labels);

/// Small recognition network: two conv3x3 -> BN -> leaky ReLU -> maxpool
/// stages (3 -> 16 -> 32), global average pooling and a linear classifier.
class TinyClassifier {
 public:
  static TinyClassifier init(int classes, std::uint64_t seed);

  Var forward(const Var& x);

  int classes() const { return fc_.out(); }
  bool frozen() const { return frozen_; }

  /// Stops parameter gradients and switches BN to running statistics.
  /// Gradients still flow through the network to its input.
  void freeze();
  void set_mode(NormMode mode);

  ParamList named_parameters() const;
  std::string fingerprint() const;

  /// Builds a frozen classifier from a checkpoint.
  static TinyClassifier from_checkpoint(const Checkpoint& ckpt);

 private:
  Conv2dParams conv1_, conv2_;
  NormState bn1_, bn2_;
  LinearParams fc_;
  bool frozen_ = false;
};

/// Argmax predictions, evaluated without building a graph.
std::vector<int> predict(TinyClassifier& clf, const Tensor& images,
                         int chunk = 64);
double accuracy(std::span<const int> predicted, std::span<const int> labels);

struct PretrainConfig {
  int epochs = 20;
  double lr = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

/// Trains on clean images with Adam and returns the classifier frozen.
/// Throws NumericError if the loss becomes non-finite.
TinyClassifier pretrain_classifier(
    const ToyDataset& ds, const PretrainConfig& cfg,
    PretrainResult* result = nullptr,
    const std::function<void(int epoch, double loss)>& on_epoch = {});

}  // namespace urie
