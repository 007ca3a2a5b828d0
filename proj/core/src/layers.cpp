#include "urie/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace urie {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

Var kaiming(Shape shape, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / fan_in);
  Tensor t(shape);
  for (double& v : t.values()) v = stddev * rng.normal();
  return Var(std::move(t), true);
}

struct ConvGeometry {
  int n, c_in, h, w, c_out, k, stride, pad, h_out, w_out;
  int rows() const { return c_in * k * k; }
  int cols() const { return h_out * w_out; }
};

ConvGeometry geometry(const Shape& x, const Conv2dParams& p) {
  ConvGeometry g{x.n,        x.c, x.h, x.w, p.c_out(), p.k(), p.stride,
                 p.padding, 0,   0};
  g.h_out = conv_out_size(x.h, g.k, g.stride, g.pad);
  g.w_out = conv_out_size(x.w, g.k, g.stride, g.pad);
  return g;
}

// Unfolds one sample into a (c_in * k * k, h_out * w_out) row-major matrix.
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  for (int ci = 0; ci < g.c_in; ++ci) {
    const double* plane = x + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = cols + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.h_out; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + oy * g.w_out;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.w_out, 0.0);
            continue;
          }
          const double* src = plane + iy * g.w;
          for (int ox = 0; ox < g.w_out; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeometry& g, double* dx) {
  for (int ci = 0; ci < g.c_in; ++ci) {
    double* plane = dx + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = cols + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.h_out; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          double* dst = plane + iy * g.w;
          for (int ox = 0; ox < g.w_out; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += row[oy * g.w_out + ox];
          }
        }
      }
    }
  }
}

// One resampling axis: output i reads (1 - frac) * in[lo] + frac * in[hi].
struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

AxisTaps axis_taps(int in, int out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    t.lo[i] = lo;
    t.hi[i] = std::min(lo + 1, in - 1);
    t.frac[i] = src - lo;
  }
  return t;
}

// Statistics for normalizing a set of equally sized planes jointly.
struct PlaneGroup {
  std::vector<std::size_t> offsets;
  int param_index;  // channel owning gamma/beta
};

struct NormCache {
  Tensor xhat;
  std::vector<double> inv_std;  // per group
};

void normalize_groups(const Tensor& x, const std::vector<PlaneGroup>& groups,
                      const double* mean_override, const double* var_override,
                      double eps, const Tensor& gamma, const Tensor& beta,
                      Tensor& out, NormCache& cache, std::vector<double>* means,
                      std::vector<double>* vars) {
  const std::size_t plane = x.shape().plane();
  cache.xhat = Tensor(x.shape());
  cache.inv_std.assign(groups.size(), 0.0);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& grp = groups[gi];
    double mu, var;
    if (mean_override != nullptr) {
      mu = mean_override[grp.param_index];
      var = var_override[grp.param_index];
    } else {
      const double count = static_cast<double>(grp.offsets.size() * plane);
      double s = 0.0;
      for (std::size_t off : grp.offsets) {
        for (std::size_t i = 0; i < plane; ++i) s += x[off + i];
      }
      mu = s / count;
      double ss = 0.0;
      for (std::size_t off : grp.offsets) {
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = x[off + i] - mu;
          ss += d * d;
        }
      }
      var = ss / count;
    }
    if (means) means->push_back(mu);
    if (vars) vars->push_back(var);
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.inv_std[gi] = inv;
    const double ga = gamma[grp.param_index], be = beta[grp.param_index];
    for (std::size_t off : grp.offsets) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (x[off + i] - mu) * inv;
        cache.xhat[off + i] = xh;
        out[off + i] = ga * xh + be;
      }
    }
  }
}

// Backward of gamma * (x - mean) / sqrt(var + eps) + beta. When the
// statistics are batch statistics, the gradient also flows through them.
void normalize_groups_backward(const Tensor& g,
                               const std::vector<PlaneGroup>& groups,
                               const NormCache& cache, bool through_stats,
                               const std::shared_ptr<Node>& nx,
                               const std::shared_ptr<Node>& ngamma,
                               const std::shared_ptr<Node>& nbeta) {
  const std::size_t plane = g.shape().plane();
  Tensor* dx = nx->requires_grad ? &nx->grad_slot() : nullptr;
  Tensor* dgamma = ngamma->requires_grad ? &ngamma->grad_slot() : nullptr;
  Tensor* dbeta = nbeta->requires_grad ? &nbeta->grad_slot() : nullptr;
  const Tensor& gamma = ngamma->value;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& grp = groups[gi];
    double sum_g = 0.0, sum_g_xhat = 0.0;
    for (std::size_t off : grp.offsets) {
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += g[off + i];
        sum_g_xhat += g[off + i] * cache.xhat[off + i];
      }
    }
    if (dgamma) (*dgamma)[grp.param_index] += sum_g_xhat;
    if (dbeta) (*dbeta)[grp.param_index] += sum_g;
    if (!dx) continue;
    const double ga = gamma[grp.param_index];
    const double inv = cache.inv_std[gi];
    if (!through_stats) {
      for (std::size_t off : grp.offsets) {
        for (std::size_t i = 0; i < plane; ++i) {
          (*dx)[off + i] += g[off + i] * ga * inv;
        }
      }
      continue;
    }
    const double count = static_cast<double>(grp.offsets.size() * plane);
    const double mean_g = sum_g / count;
    const double mean_g_xhat = sum_g_xhat / count;
    for (std::size_t off : grp.offsets) {
      for (std::size_t i = 0; i < plane; ++i) {
        (*dx)[off + i] += ga * inv *
                          (g[off + i] - mean_g - cache.xhat[off + i] * mean_g_xhat);
      }
    }
  }
}

Var apply_norm(const Var& x, const NormState& st,
               const std::vector<PlaneGroup>& groups, const double* mu,
               const double* var, std::vector<double>* means,
               std::vector<double>* vars) {
  Tensor out(x.shape());
  auto cache = std::make_shared<NormCache>();
  normalize_groups(x.value(), groups, mu, var, st.eps, st.gamma.value(),
                   st.beta.value(), out, *cache, means, vars);
  const bool through_stats = mu == nullptr;
  auto nx = x.node(), ng = st.gamma.node(), nb = st.beta.node();
  return Var::make(std::move(out), {x, st.gamma, st.beta},
                   [nx, ng, nb, groups, cache, through_stats](const Tensor& g) {
                     normalize_groups_backward(g, groups, *cache, through_stats,
                                               nx, ng, nb);
                   });
}

void check_norm_channels(const Var& x, const NormState& st) {
  if (x.shape().c != st.channels()) {
    throw ContractError("normalization expects " +
                        std::to_string(st.channels()) + " channels, got " +
                        x.shape().str());
  }
}

}  // namespace

const char* to_string(NormKind kind) {
  return kind == NormKind::kBatch ? "batch" : "instance";
}

Conv2dParams Conv2dParams::init(int c_in, int c_out, int k, int stride,
                                int padding, Rng& rng) {
  Conv2dParams p;
  p.kernel = kaiming({c_out, c_in, k, k}, c_in * k * k, rng);
  p.bias = Var(Tensor::zeros({c_out, 1, 1, 1}), true);
  p.stride = stride;
  p.padding = padding;
  return p;
}

LinearParams LinearParams::init(int in, int out, Rng& rng) {
  LinearParams p;
  p.weight = kaiming({out, in, 1, 1}, in, rng);
  p.bias = Var(Tensor::zeros({out, 1, 1, 1}), true);
  return p;
}

NormState NormState::init(int channels, NormKind kind) {
  NormState st;
  st.kind = kind;
  st.gamma = Var(Tensor::ones({channels, 1, 1, 1}), true);
  st.beta = Var(Tensor::zeros({channels, 1, 1, 1}), true);
  st.running_mean = Var(Tensor::zeros({channels, 1, 1, 1}));
  st.running_var = Var(Tensor::ones({channels, 1, 1, 1}));
  return st;
}

Var conv2d(const Var& x, const Conv2dParams& p) {
  const Shape& s = x.shape();
  if (s.c != p.c_in()) {
    throw ContractError("conv2d: input has " + std::to_string(s.c) +
                        " channels, kernel expects " +
                        std::to_string(p.c_in()));
  }
  if (p.stride < 1 || p.padding < 0) {
    throw ContractError("conv2d: stride must be >= 1 and padding >= 0");
  }
  const ConvGeometry g = geometry(s, p);
  if (g.h_out < 1 || g.w_out < 1) {
    throw ContractError("conv2d: kernel larger than padded input");
  }
  Tensor out({g.n, g.c_out, g.h_out, g.w_out});
  std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap weight(p.kernel.value().data(), g.c_out, g.rows());
  ConstMatMap colmat(cols.data(), g.rows(), g.cols());
  const std::size_t in_stride = static_cast<std::size_t>(g.c_in) * g.h * g.w;
  const std::size_t out_stride = static_cast<std::size_t>(g.c_out) * g.cols();
  for (int n = 0; n < g.n; ++n) {
    im2col(x.value().data() + n * in_stride, g, cols.data());
    MatMap o(out.data() + n * out_stride, g.c_out, g.cols());
    o.noalias() = weight * colmat;
    for (int co = 0; co < g.c_out; ++co) o.row(co).array() += p.bias.value()[co];
  }
  auto nx = x.node(), nk = p.kernel.node(), nb = p.bias.node();
  return Var::make(
      std::move(out), {x, p.kernel, p.bias}, [nx, nk, nb, g](const Tensor& grad) {
        std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
        ConstMatMap weight(nk->value.data(), g.c_out, g.rows());
        const std::size_t in_stride = static_cast<std::size_t>(g.c_in) * g.h * g.w;
        const std::size_t out_stride = static_cast<std::size_t>(g.c_out) * g.cols();
        for (int n = 0; n < g.n; ++n) {
          ConstMatMap go(grad.data() + n * out_stride, g.c_out, g.cols());
          if (nk->requires_grad) {
            im2col(nx->value.data() + n * in_stride, g, cols.data());
            ConstMatMap colmat(cols.data(), g.rows(), g.cols());
            MatMap dk(nk->grad_slot().data(), g.c_out, g.rows());
            dk.noalias() += go * colmat.transpose();
          }
          if (nb->requires_grad) {
            Tensor& db = nb->grad_slot();
            for (int co = 0; co < g.c_out; ++co) db[co] += go.row(co).sum();
          }
          if (nx->requires_grad) {
            MatMap dcols(cols.data(), g.rows(), g.cols());
            dcols.noalias() = weight.transpose() * go;
            col2im(cols.data(), g, nx->grad_slot().data() + n * in_stride);
          }
        }
      });
}

Var max_pool2(const Var& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ContractError("max_pool2 needs even spatial extents, got " + s.str());
  }
  Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out(os);
  auto argmax = std::make_shared<std::vector<std::size_t>>(os.numel());
  const Tensor& in = x.value();
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx, ++o) {
          std::size_t best = in.offset(n, c, 2 * y, 2 * xx);
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t idx = in.offset(n, c, 2 * y + dy, 2 * xx + dx);
              if (in[idx] > in[best]) best = idx;  // strict: first max wins
            }
          }
          out[o] = in[best];
          (*argmax)[o] = best;
        }
      }
    }
  }
  auto nx = x.node();
  return Var::make(std::move(out), {x}, [nx, argmax](const Tensor& g) {
    Tensor& slot = nx->grad_slot();
    for (std::size_t i = 0; i < g.size(); ++i) slot[(*argmax)[i]] += g[i];
  });
}

Var bilinear_resize(const Var& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ContractError("bilinear_resize target must be at least 1x1");
  }
  const Shape& s = x.shape();
  const AxisTaps ty = axis_taps(s.h, out_h), tx = axis_taps(s.w, out_w);
  Shape os{s.n, s.c, out_h, out_w};
  Tensor out(os);
  const Tensor& in = x.value();
  for (int p = 0; p < s.n * s.c; ++p) {
    const double* src = in.data() + static_cast<std::size_t>(p) * s.plane();
    double* dst = out.data() + static_cast<std::size_t>(p) * os.plane();
    for (int y = 0; y < out_h; ++y) {
      const double* r0 = src + ty.lo[y] * s.w;
      const double* r1 = src + ty.hi[y] * s.w;
      const double fy = ty.frac[y];
      for (int xx = 0; xx < out_w; ++xx) {
        const double fx = tx.frac[xx];
        const double top = r0[tx.lo[xx]] * (1.0 - fx) + r0[tx.hi[xx]] * fx;
        const double bot = r1[tx.lo[xx]] * (1.0 - fx) + r1[tx.hi[xx]] * fx;
        dst[y * out_w + xx] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  auto nx = x.node();
  return Var::make(std::move(out), {x}, [nx, ty, tx, s, os](const Tensor& g) {
    Tensor& slot = nx->grad_slot();
    for (int p = 0; p < s.n * s.c; ++p) {
      double* dst = slot.data() + static_cast<std::size_t>(p) * s.plane();
      const double* src = g.data() + static_cast<std::size_t>(p) * os.plane();
      for (int y = 0; y < os.h; ++y) {
        double* r0 = dst + ty.lo[y] * s.w;
        double* r1 = dst + ty.hi[y] * s.w;
        const double fy = ty.frac[y];
        for (int xx = 0; xx < os.w; ++xx) {
          const double v = src[y * os.w + xx];
          const double fx = tx.frac[xx];
          r0[tx.lo[xx]] += v * (1.0 - fy) * (1.0 - fx);
          r0[tx.hi[xx]] += v * (1.0 - fy) * fx;
          r1[tx.lo[xx]] += v * fy * (1.0 - fx);
          r1[tx.hi[xx]] += v * fy * fx;
        }
      }
    }
  });
}

Var fully_connected(const Var& x, const LinearParams& p) {
  const Shape& s = x.shape();
  const int in = static_cast<int>(s.c * s.plane());
  if (in != p.in()) {
    throw ContractError("fully_connected: input length " + std::to_string(in) +
                        " does not match weight input " +
                        std::to_string(p.in()));
  }
  const int out_dim = p.out();
  Tensor out({s.n, out_dim, 1, 1});
  ConstMatMap xm(x.value().data(), s.n, in);
  ConstMatMap wm(p.weight.value().data(), out_dim, in);
  MatMap om(out.data(), s.n, out_dim);
  om.noalias() = xm * wm.transpose();
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < out_dim; ++o) om(n, o) += p.bias.value()[o];
  }
  auto nx = x.node(), nw = p.weight.node(), nb = p.bias.node();
  const int batch = s.n;
  return Var::make(std::move(out), {x, p.weight, p.bias},
                   [nx, nw, nb, batch, in, out_dim](const Tensor& g) {
                     ConstMatMap gm(g.data(), batch, out_dim);
                     if (nx->requires_grad) {
                       MatMap dx(nx->grad_slot().data(), batch, in);
                       ConstMatMap wm(nw->value.data(), out_dim, in);
                       dx.noalias() += gm * wm;
                     }
                     if (nw->requires_grad) {
                       MatMap dw(nw->grad_slot().data(), out_dim, in);
                       ConstMatMap xm(nx->value.data(), batch, in);
                       dw.noalias() += gm.transpose() * xm;
                     }
                     if (nb->requires_grad) {
                       Tensor& db = nb->grad_slot();
                       for (int o = 0; o < out_dim; ++o) {
                         db[o] += gm.col(o).sum();
                       }
                     }
                   });
}

Var batch_norm(const Var& x, NormState& st) {
  check_norm_channels(x, st);
  const Shape& s = x.shape();
  std::vector<PlaneGroup> groups(s.c);
  for (int c = 0; c < s.c; ++c) {
    groups[c].param_index = c;
    for (int n = 0; n < s.n; ++n) groups[c].offsets.push_back(x.value().offset(n, c, 0, 0));
  }
  if (st.mode == NormMode::kEval) {
    return apply_norm(x, st, groups, st.running_mean.value().data(),
                      st.running_var.value().data(), nullptr, nullptr);
  }
  if (s.n < 2) {
    throw ContractError("batch_norm in train mode needs a batch of at least 2");
  }
  std::vector<double> means, vars;
  Var out = apply_norm(x, st, groups, nullptr, nullptr, &means, &vars);
  Tensor& rm = st.running_mean.mutable_value();
  Tensor& rv = st.running_var.mutable_value();
  for (int c = 0; c < s.c; ++c) {
    rm[c] = (1.0 - st.momentum) * rm[c] + st.momentum * means[c];
    rv[c] = (1.0 - st.momentum) * rv[c] + st.momentum * vars[c];
  }
  return out;
}

Var instance_norm(const Var& x, const NormState& st) {
  check_norm_channels(x, st);
  const Shape& s = x.shape();
  if (s.plane() < 2) {
    throw ContractError("instance_norm needs at least 2 spatial elements");
  }
  std::vector<PlaneGroup> groups;
  groups.reserve(static_cast<std::size_t>(s.n) * s.c);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      groups.push_back({{x.value().offset(n, c, 0, 0)}, c});
    }
  }
  return apply_norm(x, st, groups, nullptr, nullptr, nullptr, nullptr);
}

Var normalize(const Var& x, NormState& st) {
  return st.kind == NormKind::kBatch ? batch_norm(x, st) : instance_norm(x, st);
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ContractError("concat_channels: mismatch " + sa.str() + " vs " +
                        sb.str());
  }
  Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor out(os);
  const std::size_t pa = sa.c * sa.plane(), pb = sb.c * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.value().data() + n * pa, pa, out.data() + n * (pa + pb));
    std::copy_n(b.value().data() + n * pb, pb, out.data() + n * (pa + pb) + pa);
  }
  auto na = a.node(), nb = b.node();
  const int batch = sa.n;
  return Var::make(std::move(out), {a, b}, [na, nb, pa, pb, batch](const Tensor& g) {
    for (int n = 0; n < batch; ++n) {
      const double* src = g.data() + n * (pa + pb);
      if (na->requires_grad) {
        double* dst = na->grad_slot().data() + n * pa;
        for (std::size_t i = 0; i < pa; ++i) dst[i] += src[i];
      }
      if (nb->requires_grad) {
        double* dst = nb->grad_slot().data() + n * pb;
        for (std::size_t i = 0; i < pb; ++i) dst[i] += src[pa + i];
      }
    }
  });
}

Var slice_channels(const Var& x, int begin, int count) {
  const Shape& s = x.shape();
  if (begin < 0 || count < 1 || begin + count > s.c) {
    throw ContractError("slice_channels out of range for " + s.str());
  }
  Shape os{s.n, count, s.h, s.w};
  Tensor out(os);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(x.value().data() + x.value().offset(n, begin, 0, 0),
                count * plane, out.data() + out.offset(n, 0, 0, 0));
  }
  auto nx = x.node();
  return Var::make(std::move(out), {x}, [nx, s, begin, count, plane](const Tensor& g) {
    Tensor& slot = nx->grad_slot();
    for (int n = 0; n < s.n; ++n) {
      double* dst = slot.data() + slot.offset(n, begin, 0, 0);
      const double* src = g.data() + static_cast<std::size_t>(n) * count * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
}

Var patch_avg_pool_4x4(const Var& x) {
  const Shape& s = x.shape();
  if (s.h % 4 != 0 || s.w % 4 != 0) {
    throw ContractError("patch_avg_pool_4x4 needs extents divisible by 4, got " +
                        s.str());
  }
  const int bh = s.h / 4, bw = s.w / 4;
  const double inv = 1.0 / (bh * bw);
  Tensor out({s.n, s.c, 4, 4});
  const Tensor& in = x.value();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int xx = 0; xx < s.w; ++xx) {
          out.at(n, c, y / bh, xx / bw) += in.at(n, c, y, xx);
        }
      }
    }
  }
  for (double& v : out.values()) v *= inv;
  auto nx = x.node();
  return Var::make(std::move(out), {x}, [nx, s, bh, bw, inv](const Tensor& g) {
    Tensor& slot = nx->grad_slot();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        for (int y = 0; y < s.h; ++y) {
          for (int xx = 0; xx < s.w; ++xx) {
            slot.at(n, c, y, xx) += g.at(n, c, y / bh, xx / bw) * inv;
          }
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Shape& s = x.shape();
  const std::size_t plane = s.plane();
  const double inv = 1.0 / static_cast<double>(plane);
  Tensor out({s.n, s.c, 1, 1});
  for (int p = 0; p < s.n * s.c; ++p) {
    double acc = 0.0;
    const double* src = x.value().data() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += src[i];
    out[p] = acc * inv;
  }
  auto nx = x.node();
  return Var::make(std::move(out), {x}, [nx, plane, inv](const Tensor& g) {
    Tensor& slot = nx->grad_slot();
    for (std::size_t p = 0; p < g.size(); ++p) {
      for (std::size_t i = 0; i < plane; ++i) slot[p * plane + i] += g[p] * inv;
    }
  });
}

}  // namespace urie
