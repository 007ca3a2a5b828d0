#pragma once

#include <string>
#include <utility>
#include <vector>

#include "urie/layers.hpp"

namespace urie {

inline constexpr int kDefaultReductionRatio = 16;
inline constexpr int kAttentionGrid = 4;
inline constexpr int kAttentionCells = kAttentionGrid * kAttentionGrid;

/// Parameters of one Selective Enhancement Module.
///
/// Two enhancement steps run side by side, each as
/// normalize -> leaky ReLU -> 3x3 conv. Their outputs are blended by a
/// softmax attention computed per channel and per cell of a 4x4 grid:
/// the summed features are patch-pooled, flattened, squeezed by `fc1`
/// (16C -> 16C / r), passed through leaky ReLU and expanded by one head per
/// step (16C / r -> 16C).
///
/// The "in" step uses instance norm and the "bn" step batch norm unless a
/// normalization ablation overrides the kinds; member names stay the same.
struct SemParams {
  Conv2dParams conv_in;
  Conv2dParams conv_bn;
  NormState norm_in;
  NormState norm_bn;
  LinearParams fc1;
  LinearParams fc2_in;
  LinearParams fc2_bn;
  int reduction_ratio = kDefaultReductionRatio;

  int c_in() const { return conv_in.c_in(); }
  int c_out() const { return conv_in.c_out(); }

  static SemParams init(int c_in, int c_out, int reduction_ratio,
                        NormKind in_kind, NormKind bn_kind, Rng& rng);

  /// (suffix, var, trainable) triples in a fixed order.
  std::vector<std::tuple<std::string, Var, bool>> parameters() const;

  void set_mode(NormMode mode);
};

struct SemBranches {
  Var f_in;
  Var f_bn;
};

struct SemAttention {
  Var scores_in;  // (n, C, 4, 4)
  Var scores_bn;
  Var a_in;       // (n, C, 4, 4), a_in + a_bn == 1
  Var a_bn;
};

SemBranches sem_branches(const Var& x, SemParams& p);

SemAttention sem_attention(const Var& f_in, const Var& f_bn,
                           const SemParams& p);

/// Y = up(A_in) * F_in + up(A_bn) * F_bn with bilinear upsampling of the
/// attention to the feature resolution.
Var sem_forward(const Var& x, SemParams& p);

}  // namespace urie
