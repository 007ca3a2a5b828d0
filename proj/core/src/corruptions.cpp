#include "urie/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "json.hpp"

namespace urie {

namespace {

using Kind = CorruptionKind;

struct KindName {
  Kind kind;
  std::string_view name;
};

constexpr KindName kNames[] = {
    {Kind::kIdentity, "identity"},
    {Kind::kGaussianNoise, "gaussian_noise"},
    {Kind::kShotNoise, "shot_noise"},
    {Kind::kImpulseNoise, "impulse_noise"},
    {Kind::kDefocusBlur, "defocus_blur"},
    {Kind::kGaussianBlur, "gaussian_blur"},
    {Kind::kSpeckleNoise, "speckle_noise"},
    {Kind::kBrightness, "brightness"},
    {Kind::kContrast, "contrast"},
    {Kind::kSaturate, "saturate"},
    {Kind::kPixelate, "pixelate"},
    {Kind::kFog, "fog"},
    {Kind::kFrost, "frost"},
    {Kind::kSnow, "snow"},
    {Kind::kSpatter, "spatter"},
    {Kind::kGlassBlur, "glass_blur"},
    {Kind::kMotionBlur, "motion_blur"},
    {Kind::kZoomBlur, "zoom_blur"},
    {Kind::kElasticTransform, "elastic_transform"},
    {Kind::kJpegCompression, "jpeg_compression"},
};

constexpr Kind kSeen[] = {Kind::kGaussianNoise, Kind::kShotNoise,
                          Kind::kImpulseNoise,  Kind::kDefocusBlur,
                          Kind::kBrightness,    Kind::kContrast,
                          Kind::kPixelate,      Kind::kFog};
constexpr Kind kUnseen[] = {Kind::kSpeckleNoise, Kind::kGaussianBlur,
                            Kind::kSaturate};
constexpr Kind kAll[] = {Kind::kGaussianNoise, Kind::kShotNoise,
                         Kind::kImpulseNoise,  Kind::kDefocusBlur,
                         Kind::kBrightness,    Kind::kContrast,
                         Kind::kPixelate,      Kind::kFog,
                         Kind::kSpeckleNoise,  Kind::kGaussianBlur,
                         Kind::kSaturate};

SeverityTable make_defaults() {
  const char* text = R"({
    "gaussian_noise": [0.08, 0.12, 0.18, 0.26, 0.38],
    "shot_noise":     [60, 25, 12, 5, 3],
    "impulse_noise":  [0.03, 0.06, 0.09, 0.17, 0.27],
    "speckle_noise":  [0.15, 0.2, 0.35, 0.45, 0.6],
    "gaussian_blur":  [0.5, 0.75, 1.0, 1.5, 2.0],
    "defocus_blur":   [1.0, 1.5, 2.0, 2.5, 3.0],
    "brightness":     [0.1, 0.2, 0.3, 0.4, 0.5],
    "contrast":       [0.4, 0.3, 0.2, 0.1, 0.05],
    "saturate":       [1.5, 2.0, 3.0, 5.0, 8.0],
    "pixelate":       [0.6, 0.5, 0.4, 0.3, 0.25],
    "fog":            [0.25, 0.4, 0.55, 0.7, 0.85]
  })";
  return SeverityTable::from_json(text);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Convolves each channel plane with a (2r+1)^2 kernel, clamping reads to the
// image border.
Tensor filter_clamped(const Tensor& img, const std::vector<double>& kernel,
                      int radius) {
  const Shape& s = img.shape();
  const int size = 2 * radius + 1;
  Tensor out(s);
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        double acc = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int yy = std::clamp(y + dy, 0, s.h - 1);
          for (int dx = -radius; dx <= radius; ++dx) {
            const int xx = std::clamp(x + dx, 0, s.w - 1);
            acc += kernel[(dy + radius) * size + dx + radius] * img.at(0, c, yy, xx);
          }
        }
        out.at(0, c, y, x) = acc;
      }
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const int size = 2 * radius + 1;
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  double total = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k[(dy + radius) * size + dx + radius] = v;
      total += v;
    }
  }
  for (double& v : k) v /= total;
  return filter_clamped(img, k, radius);
}

Tensor defocus_blur(const Tensor& img, double radius_px) {
  const int radius = static_cast<int>(std::ceil(radius_px));
  const int size = 2 * radius + 1;
  std::vector<double> k(static_cast<std::size_t>(size) * size, 0.0);
  double total = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius_px * radius_px) {
        k[(dy + radius) * size + dx + radius] = 1.0;
        total += 1.0;
      }
    }
  }
  for (double& v : k) v /= total;
  return filter_clamped(img, k, radius);
}

// Inverse-transform sampling; one uniform per draw.
double poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0.0;
  const double u = rng.uniform();
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 10000) {
    ++k;
    p *= mean / k;
    cdf += p;
    if (p == 0.0 && cdf < u) break;  // tail underflow; u is within rounding of 1
  }
  return k;
}

Tensor pixelate(const Tensor& img, double factor) {
  const Shape& s = img.shape();
  const int sh = std::max(1, static_cast<int>(std::lround(s.h * factor)));
  const int sw = std::max(1, static_cast<int>(std::lround(s.w * factor)));
  auto bin = [](int i, int small, int full) {
    return static_cast<int>(static_cast<long>(i) * small / full);
  };
  Tensor out(s);
  std::vector<double> sums(static_cast<std::size_t>(sh) * sw);
  std::vector<int> counts(sums.size());
  for (int c = 0; c < s.c; ++c) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        const int b = bin(y, sh, s.h) * sw + bin(x, sw, s.w);
        sums[b] += img.at(0, c, y, x);
        ++counts[b];
      }
    }
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        const int b = bin(y, sh, s.h) * sw + bin(x, sw, s.w);
        out.at(0, c, y, x) = sums[b] / counts[b];
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(CorruptionKind kind) {
  for (const auto& kn : kNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

CorruptionKind parse_corruption_kind(std::string_view name) {
  for (const auto& kn : kNames) {
    if (kn.name == name) return kn.kind;
  }
  throw ContractError("unknown corruption kind '" + std::string(name) + "'");
}

bool is_implemented(CorruptionKind kind) {
  return static_cast<int>(kind) <= static_cast<int>(CorruptionKind::kFog);
}

std::span<const CorruptionKind> seen_kinds() { return kSeen; }
std::span<const CorruptionKind> unseen_kinds() { return kUnseen; }

std::span<const CorruptionKind> pool_kinds(CorruptionPool pool) {
  switch (pool) {
    case CorruptionPool::kSeen:
      return kSeen;
    case CorruptionPool::kUnseen:
      return kUnseen;
    case CorruptionPool::kAll:
      return kAll;
  }
  return {};
}

CorruptionPool parse_pool(std::string_view name) {
  if (name == "seen") return CorruptionPool::kSeen;
  if (name == "unseen") return CorruptionPool::kUnseen;
  if (name == "all") return CorruptionPool::kAll;
  throw ContractError("unknown corruption pool '" + std::string(name) + "'");
}

const SeverityTable& SeverityTable::defaults() {
  static const SeverityTable table = make_defaults();
  return table;
}

SeverityTable SeverityTable::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractError(std::string("severity table: ") + e.what());
  }
  if (!j.is_object()) throw ContractError("severity table must be a JSON object");
  SeverityTable t;
  for (const auto& [name, values] : j.items()) {
    const Kind kind = parse_corruption_kind(name);
    if (!is_implemented(kind) || kind == Kind::kIdentity) {
      throw ContractError("severity table lists non-parametric kind " + name);
    }
    if (!values.is_array() || values.size() != kSeverityLevels) {
      throw ContractError("severity table entry " + name + " needs 5 numbers");
    }
    Levels levels{};
    for (int i = 0; i < kSeverityLevels; ++i) levels[i] = values[i].get<double>();
    t.levels_[kind] = levels;
  }
  for (Kind k : kAll) {
    if (!t.levels_.contains(k)) {
      throw ContractError("severity table lacks " + std::string(to_string(k)));
    }
  }
  return t;
}

SeverityTable SeverityTable::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ContractError("cannot read severity table " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

std::string SeverityTable::to_json() const {
  nlohmann::ordered_json j;
  for (Kind k : kAll) {
    const auto& lv = levels_.at(k);
    j[std::string(to_string(k))] = std::vector<double>(lv.begin(), lv.end());
  }
  return j.dump(2);
}

double SeverityTable::param(CorruptionKind kind, int severity) const {
  if (severity < 1 || severity > kSeverityLevels) {
    throw ContractError("severity must be in 1..5, got " + std::to_string(severity));
  }
  auto it = levels_.find(kind);
  if (it == levels_.end()) {
    throw ContractError("no severity entry for " + std::string(to_string(kind)));
  }
  return it->second[severity - 1];
}

Tensor corrupt(const Tensor& img, const CorruptionSpec& spec,
               const SeverityTable& table) {
  if (!is_implemented(spec.kind)) {
    throw UnimplementedCorruption("corruption '" + std::string(to_string(spec.kind)) +
                                  "' is reserved, not implemented");
  }
  if (spec.severity < 1 || spec.severity > kSeverityLevels) {
    throw ContractError("severity must be in 1..5, got " +
                        std::to_string(spec.severity));
  }
  const Shape& s = img.shape();
  if (s.n != 1 || s.c != 3 || s.h < 1 || s.w < 1) {
    throw ContractError("corrupt expects a (1, 3, h, w) image, got " + s.str());
  }
  if (spec.kind == Kind::kIdentity) return img;

  const double a = table.param(spec.kind, spec.severity);
  Rng rng(spec.seed);
  Tensor out(s);
  switch (spec.kind) {
    case Kind::kGaussianNoise:
      for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] + a * rng.normal();
      break;
    case Kind::kShotNoise:
      for (std::size_t i = 0; i < img.size(); ++i) {
        out[i] = poisson(rng, img[i] * a) / a;
      }
      break;
    case Kind::kImpulseNoise:
      for (std::size_t i = 0; i < img.size(); ++i) {
        const bool hit = rng.bernoulli(a);
        out[i] = hit ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : img[i];
      }
      break;
    case Kind::kSpeckleNoise:
      for (std::size_t i = 0; i < img.size(); ++i) {
        out[i] = img[i] + img[i] * a * rng.normal();
      }
      break;
    case Kind::kGaussianBlur:
      out = gaussian_blur(img, a);
      break;
    case Kind::kDefocusBlur:
      out = defocus_blur(img, a);
      break;
    case Kind::kBrightness:
      for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] + a;
      break;
    case Kind::kContrast: {
      double m = 0.0;
      for (double v : img.values()) m += v;
      m /= static_cast<double>(img.size());
      for (std::size_t i = 0; i < img.size(); ++i) out[i] = (img[i] - m) * a + m;
      break;
    }
    case Kind::kSaturate:
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          const double r = img.at(0, 0, y, x), g = img.at(0, 1, y, x),
                       b = img.at(0, 2, y, x);
          const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
          for (int c = 0; c < 3; ++c) {
            out.at(0, c, y, x) = luma + a * (img.at(0, c, y, x) - luma);
          }
        }
      }
      break;
    case Kind::kPixelate:
      out = pixelate(img, a);
      break;
    case Kind::kFog: {
      const std::vector<double> field = plasma_field(s.h, s.w, spec.seed);
      for (int c = 0; c < s.c; ++c) {
        for (int y = 0; y < s.h; ++y) {
          for (int x = 0; x < s.w; ++x) {
            const double t = a * field[static_cast<std::size_t>(y) * s.w + x];
            out.at(0, c, y, x) = img.at(0, c, y, x) * (1.0 - t) + t;
          }
        }
      }
      break;
    }
    default:
      throw UnimplementedCorruption("corruption '" + std::string(to_string(spec.kind)) +
                                    "' is reserved, not implemented");
  }
  for (double& v : out.values()) v = clamp01(v);
  return out;
}

CorruptionSpec sample_spec(Rng& rng, CorruptionPool pool, bool include_clean) {
  const auto kinds = pool_kinds(pool);
  if (kinds.empty()) throw ContractError("empty corruption pool");
  const std::uint64_t choices = kinds.size() + (include_clean ? 1 : 0);
  const std::uint64_t k = rng.below(choices);
  CorruptionSpec spec;
  spec.kind = k < kinds.size() ? kinds[k] : Kind::kIdentity;
  spec.severity = 1 + static_cast<int>(rng.below(kSeverityLevels));
  spec.seed = rng.next_u64();
  return spec;
}

std::vector<double> plasma_field(int h, int w, std::uint64_t seed, double decay) {
  int size = 1;
  while (size + 1 < std::max(h, w)) size *= 2;
  const int n = size + 1;
  std::vector<double> g(static_cast<std::size_t>(n) * n, 0.0);
  auto at = [&](int y, int x) -> double& { return g[static_cast<std::size_t>(y) * n + x]; };
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  double amp = 1.0;
  for (int y : {0, size}) {
    for (int x : {0, size}) at(y, x) = rng.uniform(-amp, amp);
  }
  for (int step = size; step > 1; step /= 2) {
    const int half = step / 2;
    amp /= decay;
    // Square step: centers of each step x step cell.
    for (int y = half; y < n; y += step) {
      for (int x = half; x < n; x += step) {
        const double avg = (at(y - half, x - half) + at(y - half, x + half) +
                            at(y + half, x - half) + at(y + half, x + half)) /
                           4.0;
        at(y, x) = avg + rng.uniform(-amp, amp);
      }
    }
    // Diamond step: edge midpoints, averaging the neighbours that exist.
    for (int y = 0; y < n; y += half) {
      for (int x = (y / half) % 2 == 0 ? half : 0; x < n; x += step) {
        double acc = 0.0;
        int cnt = 0;
        if (y - half >= 0) acc += at(y - half, x), ++cnt;
        if (y + half < n) acc += at(y + half, x), ++cnt;
        if (x - half >= 0) acc += at(y, x - half), ++cnt;
        if (x + half < n) acc += at(y, x + half), ++cnt;
        at(y, x) = acc / cnt + rng.uniform(-amp, amp);
      }
    }
  }
  std::vector<double> out(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(y) * w + x] = at(y, x);
  }
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : out) v = range > 0.0 ? (v - min) / range : 0.0;
  return out;
}

}  // namespace urie
