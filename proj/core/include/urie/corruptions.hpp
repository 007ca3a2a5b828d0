#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include "urie/rng.hpp"
#include "urie/tensor.hpp"

namespace urie {

enum class CorruptionKind {
  kIdentity,
  kGaussianNoise,
  kShotNoise,
  kImpulseNoise,
  kDefocusBlur,
  kGaussianBlur,
  kSpeckleNoise,
  kBrightness,
  kContrast,
  kSaturate,
  kPixelate,
  kFog,
  // Reserved names: these need texture assets, a codec or iterative pixel
  // shuffles and are rejected by corrupt().
  kFrost,
  kSnow,
  kSpatter,
  kGlassBlur,
  kMotionBlur,
  kZoomBlur,
  kElasticTransform,
  kJpegCompression,
};

/// Raised when a reserved corruption kind is requested.
class UnimplementedCorruption : public ContractError {
 public:
  using ContractError::ContractError;
};

std::string_view to_string(CorruptionKind kind);
/// Accepts every name, including reserved ones; throws ContractError for
/// unknown names.
CorruptionKind parse_corruption_kind(std::string_view name);
bool is_implemented(CorruptionKind kind);

enum class CorruptionPool { kSeen, kUnseen, kAll };

std::span<const CorruptionKind> seen_kinds();
std::span<const CorruptionKind> unseen_kinds();
std::span<const CorruptionKind> pool_kinds(CorruptionPool pool);
CorruptionPool parse_pool(std::string_view name);

inline constexpr int kSeverityLevels = 5;

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kIdentity;
  int severity = 1;  // 1..5
  std::uint64_t seed = 0;

  bool operator==(const CorruptionSpec&) const = default;
};

/// Per-kind parameter for each severity level:
///   gaussian_noise  noise std            shot_noise    photons per unit
///   impulse_noise   replaced fraction    speckle_noise relative noise std
///   gaussian_blur   kernel sigma (px)    defocus_blur  disk radius (px)
///   brightness      additive offset      contrast      contrast factor
///   saturate        chroma gain          pixelate      downscale factor
///   fog             max fog opacity
class SeverityTable {
 public:
  using Levels = std::array<double, kSeverityLevels>;

  static const SeverityTable& defaults();
  static SeverityTable from_json(std::string_view text);
  static SeverityTable load(const std::filesystem::path& path);
  std::string to_json() const;

  double param(CorruptionKind kind, int severity) const;
  const std::map<CorruptionKind, Levels>& levels() const { return levels_; }

  bool operator==(const SeverityTable&) const = default;

 private:
  std::map<CorruptionKind, Levels> levels_;
};

/// Applies a corruption to a (1, 3, h, w) image in [0, 1]. The result is a
/// pure function of (img, spec, table) and is clamped to [0, 1].
Tensor corrupt(const Tensor& img, const CorruptionSpec& spec,
               const SeverityTable& table = SeverityTable::defaults());

/// Draws a (kind, severity, seed) triple uniformly over the pool; with
/// include_clean the identity joins the pool as one extra kind.
CorruptionSpec sample_spec(Rng& rng, CorruptionPool pool, bool include_clean);

/// Diamond-square plasma of at least (h, w), normalized to [0, 1], cropped
/// to (h, w) and returned row-major.
std::vector<double> plasma_field(int h, int w, std::uint64_t seed,
                                 double decay = 2.0);

}  // namespace urie
