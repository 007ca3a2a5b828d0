#pragma once

#include <cstdint>
#include <string>

#include "urie/checkpoint.hpp"
#include "urie/sem.hpp"

namespace urie {

/// Which normalizations the SEM steps use: the default pairs instance and
/// batch norm; the ablations use one kind for both steps.
enum class NormVariant { kBoth, kBatchOnly, kInstanceOnly };

const char* to_string(NormVariant v);
NormVariant parse_norm_variant(std::string_view s);

struct UrieConfig {
  NormVariant norm_mode = NormVariant::kBoth;
  int reduction_ratio = kDefaultReductionRatio;
  bool residual_skip = true;

  /// Encodes every field that changes the parameter semantics. Stored in
  /// checkpoints and compared on load.
  std::string fingerprint() const;
  static UrieConfig from_fingerprint(std::string_view fp);
};

enum class HeadInit { kKaiming, kZero };

/// Network widths: stem 32, encoder SEMs 64 and 64, decoder SEMs 32 and 16,
/// head 3. Decoder SEMs read the upsampled features concatenated with the
/// encoder feature of matching resolution.
struct UrieParams {
  Conv2dParams stem;  // 9x9, 3 -> 32, padding 4
  SemParams sem1;     // 32 -> 64 at 1/2 resolution
  SemParams sem2;     // 64 -> 64 at 1/4 resolution
  SemParams sem3;     // 64 + 64 -> 32 at 1/2 resolution
  SemParams sem4;     // 32 + 32 -> 16 at full resolution
  Conv2dParams head;  // 3x3, 16 -> 3

  static UrieParams init(const UrieConfig& cfg, std::uint64_t seed,
                         HeadInit head_init = HeadInit::kKaiming);

  /// Every tensor under a stable dotted name, in a fixed order. Running
  /// statistics are listed as non-trainable.
  ParamList named_parameters() const;

  void set_mode(NormMode mode);
  /// Zeroes head kernel and bias, making the residual network an identity.
  void zero_head();
};

inline constexpr int kUrieSizeMultiple = 16;

/// x: (n, 3, h, w) in [0, 1] with h and w divisible by 16. Output has the
/// same shape and is clamped to [0, 1].
Var urie_forward(const Var& x, UrieParams& p, const UrieConfig& cfg);

/// Multiply-accumulate count of all convolution and fully connected layers
/// for one (h, w) input. Pooling, resizing and softmax are not counted.
std::uint64_t mac_count(const UrieConfig& cfg, int h, int w);

}  // namespace urie
