#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "urie/corruptions.hpp"
#include "urie/optim.hpp"
#include "urie/recognizer.hpp"
#include "urie/urie_net.hpp"

namespace urie {

enum class LossKind { kRecognition, kMse, kSsim };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view s);

/// Random resize-crop-flip. The default 40 -> 32 keeps the 0.875 crop ratio
/// of the usual 256 -> 224 ImageNet recipe.
struct AugmentConfig {
  bool enabled = true;
  int resize = 40;
  int crop = 32;
};

struct AugmentDraw {
  int off_y = 0;
  int off_x = 0;
  bool flip = false;
};

/// Draws offsets uniformly in [0, resize - crop] (y first, then x), then a
/// fair coin for the horizontal flip.
AugmentDraw draw_augment(Rng& rng, const AugmentConfig& cfg);
Tensor apply_augment(const Tensor& img, const AugmentDraw& draw,
                     const AugmentConfig& cfg);
Tensor augment(const Tensor& img, Rng& rng, const AugmentConfig& cfg = {});

Tensor flip_horizontal(const Tensor& img);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

/// Single-scale SSIM with a Gaussian window over valid positions only,
/// averaged over samples, channels and positions. Dynamic range 1.
Var ssim(const Var& a, const Var& b, const SsimConfig& cfg = {});

struct TrainConfig {
  double lr = 0.001;
  int lr_decay_every = 8;   // epochs
  double lr_decay_factor = 10.0;
  int epochs = 30;
  int batch_size = 16;
  LossKind loss_kind = LossKind::kRecognition;
  double data_fraction = 1.0;
  CorruptionPool pool = CorruptionPool::kSeen;
  bool include_clean = true;
  bool corrupt_inputs = true;  // false feeds the augmented clean image
  AugmentConfig augment;
  AdamConfig adam;
  std::uint64_t seed = 0;

  /// lr / factor^floor(epoch / decay_every), epochs counted from 0.
  double lr_at(int epoch) const;
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  int train_images = 0;
  long steps = 0;
};

/// Raised when training produces a non-finite loss. Parameters have been
/// restored to their values at the end of the last completed epoch.
class TrainingDiverged : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Number of images used for a given data fraction: ceil(fraction * n).
int fraction_count(int n, double fraction);

/// Loss of an enhanced batch against labels (recognition) or the clean batch
/// (mse, ssim).
Var enhancement_loss(LossKind kind, const Var& enhanced, const Tensor& clean,
                     std::span<const int> labels, TinyClassifier& clf);

/// End-to-end training of the enhancer in front of a frozen classifier.
/// Every step augments, corrupts with a spec drawn from the configured pool,
/// enhances, evaluates the loss and applies Adam. All randomness derives
/// from cfg.seed.
TrainResult train_urie(UrieParams& urie, const UrieConfig& ucfg,
                       TinyClassifier& clf, const ToyDataset& ds,
                       const TrainConfig& cfg,
                       const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Runs the enhancer in eval mode without building a graph.
Tensor enhance_images(UrieParams& urie, const UrieConfig& ucfg,
                      const Tensor& images, int chunk = 16);

}  // namespace urie
