#pragma once

#include <string>

#include "urie/autograd.hpp"
#include "urie/rng.hpp"

namespace urie {

struct Conv2dParams {
  Var kernel;  // (c_out, c_in, k, k)
  Var bias;    // (c_out, 1, 1, 1)
  int stride = 1;
  int padding = 0;

  int c_out() const { return kernel.shape().n; }
  int c_in() const { return kernel.shape().c; }
  int k() const { return kernel.shape().h; }

  /// Kaiming-normal weights (std = sqrt(2 / fan_in)), zero bias.
  static Conv2dParams init(int c_in, int c_out, int k, int stride, int padding,
                           Rng& rng);
};

/// Fully connected layer: weight (out, in, 1, 1), bias (out, 1, 1, 1).
struct LinearParams {
  Var weight;
  Var bias;

  int in() const { return weight.shape().c; }
  int out() const { return weight.shape().n; }

  static LinearParams init(int in, int out, Rng& rng);
};

enum class NormKind { kBatch, kInstance };
enum class NormMode { kTrain, kEval };

const char* to_string(NormKind kind);

/// Per-channel affine normalization state shared by batch and instance norm.
/// Running statistics are always allocated so that the parameter layout does
/// not depend on the kind; instance norm never reads or writes them.
struct NormState {
  NormKind kind = NormKind::kBatch;
  NormMode mode = NormMode::kTrain;
  Var gamma;          // (c, 1, 1, 1), trainable
  Var beta;           // (c, 1, 1, 1), trainable
  Var running_mean;   // (c, 1, 1, 1)
  Var running_var;    // (c, 1, 1, 1)
  double momentum = 0.1;
  double eps = 1e-5;

  int channels() const { return gamma.shape().n; }

  static NormState init(int channels, NormKind kind);
};

/// Zero-padded cross-correlation.
Var conv2d(const Var& x, const Conv2dParams& p);

/// 2x2 max pooling, stride 2. Ties route the gradient to the first element in
/// row-major order.
Var max_pool2(const Var& x);

/// Bilinear resampling with half-pixel centers (align_corners = false) and
/// edge clamping.
Var bilinear_resize(const Var& x, int out_h, int out_w);

/// x: (n, in, 1, 1) -> (n, out, 1, 1).
Var fully_connected(const Var& x, const LinearParams& p);

/// Train mode normalizes with biased batch statistics over (n, h, w) and
/// updates the running statistics; eval mode uses the running statistics.
Var batch_norm(const Var& x, NormState& st);

/// Per-sample, per-channel normalization over (h, w) with biased variance.
Var instance_norm(const Var& x, const NormState& st);

/// Dispatches on st.kind.
Var normalize(const Var& x, NormState& st);

Var concat_channels(const Var& a, const Var& b);

/// Channels [begin, begin + count).
Var slice_channels(const Var& x, int begin, int count);

/// Averages over each cell of a regular 4x4 grid: (n, c, h, w) -> (n, c, 4, 4).
Var patch_avg_pool_4x4(const Var& x);

/// (n, c, h, w) -> (n, c, 1, 1).
Var global_avg_pool(const Var& x);

/// Output spatial extent of a convolution.
inline int conv_out_size(int in, int k, int stride, int padding) {
  return (in + 2 * padding - k) / stride + 1;
}

}  // namespace urie
