#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "urie/corruptions.hpp"
#include "urie/recognizer.hpp"

namespace urie {

/// Evaluation sets corrupted once, ahead of evaluation. `clean` is the test
/// split verbatim; `seen` and `unseen` corrupt each test image with a spec
/// drawn from the respective pool (no identity draws).
struct EvalSplits {
  ToyDataset clean;
  ToyDataset seen;
  ToyDataset unseen;
  std::vector<CorruptionSpec> seen_specs;
  std::vector<CorruptionSpec> unseen_specs;
};

struct SplitSeeds {
  std::uint64_t seen = 1001;
  std::uint64_t unseen = 2002;
};

EvalSplits build_eval_splits(const ToyDataset& test, const SplitSeeds& seeds);

/// Writes splits.ckpt (images and labels) and specs.json into `dir`.
void save_eval_splits(const std::filesystem::path& dir, const EvalSplits& splits);
EvalSplits load_eval_splits(const std::filesystem::path& dir);

/// Maps a batch of images to enhanced images of the same shape.
using Enhancer = std::function<Tensor(const Tensor&)>;

struct SplitAccuracy {
  std::string split;
  int count = 0;
  double without = 0.0;  // identity enhancer
  double with = 0.0;
  double delta = 0.0;    // with - without
};

struct KindAccuracy {
  std::string split;
  std::string kind;
  int count = 0;
  double without = 0.0;
  double with = 0.0;
};

struct Restoration {
  double mse_without = 0.0;
  double mse_with = 0.0;
  double ssim_without = 0.0;
  double ssim_with = 0.0;
};

struct EvalReport {
  std::string enhancer;  // "identity" or a model fingerprint
  std::uint64_t mac_count = 0;
  SplitAccuracy clean, seen, unseen;
  std::vector<KindAccuracy> per_kind;
  Restoration restoration;  // over seen + unseen, per-image means

  std::string to_json() const;
  /// One row per (split, kind): split,kind,count,acc_without,acc_with.
  std::string per_kind_csv() const;
};

/// Top-1 accuracy of `clf` on every split with and without the enhancer.
/// An empty enhancer stands for the identity.
EvalReport evaluate(const Enhancer& enhancer, TinyClassifier& clf,
                    const EvalSplits& splits, std::string enhancer_name = "identity",
                    std::uint64_t mac_count = 0);

/// Per-image mean squared error, averaged over images.
double mean_image_mse(const Tensor& a, const Tensor& b);
/// Per-image SSIM, averaged over images.
double mean_image_ssim(const Tensor& a, const Tensor& b);

}  // namespace urie
