#include "urie/sem.hpp"

#include "urie/ops.hpp"

namespace urie {

SemParams SemParams::init(int c_in, int c_out, int reduction_ratio,
                          NormKind in_kind, NormKind bn_kind, Rng& rng) {
  const int flat = kAttentionCells * c_out;
  if (reduction_ratio < 1 || flat % reduction_ratio != 0) {
    throw ContractError("SEM reduction ratio " + std::to_string(reduction_ratio) +
                        " must divide " + std::to_string(flat));
  }
  SemParams p;
  p.reduction_ratio = reduction_ratio;
  p.norm_in = NormState::init(c_in, in_kind);
  p.norm_bn = NormState::init(c_in, bn_kind);
  p.conv_in = Conv2dParams::init(c_in, c_out, 3, 1, 1, rng);
  p.conv_bn = Conv2dParams::init(c_in, c_out, 3, 1, 1, rng);
  p.fc1 = LinearParams::init(flat, flat / reduction_ratio, rng);
  p.fc2_in = LinearParams::init(flat / reduction_ratio, flat, rng);
  p.fc2_bn = LinearParams::init(flat / reduction_ratio, flat, rng);
  return p;
}

std::vector<std::tuple<std::string, Var, bool>> SemParams::parameters() const {
  return {
      {"conv_in.kernel", conv_in.kernel, true},
      {"conv_in.bias", conv_in.bias, true},
      {"conv_bn.kernel", conv_bn.kernel, true},
      {"conv_bn.bias", conv_bn.bias, true},
      {"norm_in.gamma", norm_in.gamma, true},
      {"norm_in.beta", norm_in.beta, true},
      {"norm_in.running_mean", norm_in.running_mean, false},
      {"norm_in.running_var", norm_in.running_var, false},
      {"norm_bn.gamma", norm_bn.gamma, true},
      {"norm_bn.beta", norm_bn.beta, true},
      {"norm_bn.running_mean", norm_bn.running_mean, false},
      {"norm_bn.running_var", norm_bn.running_var, false},
      {"fc1.weight", fc1.weight, true},
      {"fc1.bias", fc1.bias, true},
      {"fc2_in.weight", fc2_in.weight, true},
      {"fc2_in.bias", fc2_in.bias, true},
      {"fc2_bn.weight", fc2_bn.weight, true},
      {"fc2_bn.bias", fc2_bn.bias, true},
  };
}

void SemParams::set_mode(NormMode mode) {
  norm_in.mode = mode;
  norm_bn.mode = mode;
}

SemBranches sem_branches(const Var& x, SemParams& p) {
  if (x.shape().c != p.c_in()) {
    throw ContractError("SEM expects " + std::to_string(p.c_in()) +
                        " input channels, got " + x.shape().str());
  }
  Var f_in = conv2d(leaky_relu(normalize(x, p.norm_in)), p.conv_in);
  Var f_bn = conv2d(leaky_relu(normalize(x, p.norm_bn)), p.conv_bn);
  return {f_in, f_bn};
}

SemAttention sem_attention(const Var& f_in, const Var& f_bn,
                           const SemParams& p) {
  if (f_in.shape() != f_bn.shape()) {
    throw ContractError("SEM branch outputs differ in shape");
  }
  const Shape& s = f_in.shape();
  const int flat = kAttentionCells * s.c;
  // Row-major (n, C, 4, 4) is the flatten order: channel, then row, then col.
  Var z = patch_avg_pool_4x4(ew_add(f_in, f_bn));
  Var squeezed = leaky_relu(fully_connected(reshape(z, {s.n, flat, 1, 1}), p.fc1));
  const Shape grid{s.n, s.c, kAttentionGrid, kAttentionGrid};
  Var scores_in = reshape(fully_connected(squeezed, p.fc2_in), grid);
  Var scores_bn = reshape(fully_connected(squeezed, p.fc2_bn), grid);
  auto [a_in, a_bn] = pairwise_softmax(scores_in, scores_bn);
  return {scores_in, scores_bn, a_in, a_bn};
}

Var sem_forward(const Var& x, SemParams& p) {
  auto [f_in, f_bn] = sem_branches(x, p);
  const SemAttention att = sem_attention(f_in, f_bn, p);
  const Shape& s = f_in.shape();
  Var up_in = bilinear_resize(att.a_in, s.h, s.w);
  Var up_bn = bilinear_resize(att.a_bn, s.h, s.w);
  return ew_add(ew_mul(up_in, f_in), ew_mul(up_bn, f_bn));
}

}  // namespace urie
