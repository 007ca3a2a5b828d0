#include "urie/ops.hpp"

#include <algorithm>
#include <cmath>

namespace urie {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " +
                        a.shape().str() + " vs " + b.shape().str());
  }
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Var ew_add(const Var& a, const Var& b) {
  require_same_shape(a, b, "ew_add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] + b.value()[i];
  }
  auto na = a.node(), nb = b.node();
  return Var::make(std::move(out), {a, b}, [na, nb](const Tensor& g) {
    if (na->requires_grad) na->accumulate(g);
    if (nb->requires_grad) nb->accumulate(g);
  });
}

Var ew_sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "ew_sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] - b.value()[i];
  }
  auto na = a.node(), nb = b.node();
  return Var::make(std::move(out), {a, b}, [na, nb](const Tensor& g) {
    if (na->requires_grad) na->accumulate(g);
    if (nb->requires_grad) {
      Tensor& slot = nb->grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] -= g[i];
    }
  });
}

Var ew_mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "ew_mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] * b.value()[i];
  }
  auto na = a.node(), nb = b.node();
  return Var::make(std::move(out), {a, b}, [na, nb](const Tensor& g) {
    if (na->requires_grad) {
      Tensor& slot = na->grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * nb->value[i];
    }
    if (nb->requires_grad) {
      Tensor& slot = nb->grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * na->value[i];
    }
  });
}

Var ew_div(const Var& a, const Var& b) {
  require_same_shape(a, b, "ew_div");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] / b.value()[i];
  }
  auto na = a.node(), nb = b.node();
  return Var::make(std::move(out), {a, b}, [na, nb](const Tensor& g) {
    if (na->requires_grad) {
      Tensor& slot = na->grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] / nb->value[i];
    }
    if (nb->requires_grad) {
      Tensor& slot = nb->grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = nb->value[i];
        slot[i] -= g[i] * na->value[i] / (d * d);
      }
    }
  });
}

Var scale(const Var& a, double s) {
  auto na = a.node();
  return Var::make(map(a.value(), [s](double v) { return v * s; }), {a},
                   [na, s](const Tensor& g) {
                     Tensor& slot = na->grad_slot();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       slot[i] += g[i] * s;
                     }
                   });
}

Var add_scalar(const Var& a, double s) {
  auto na = a.node();
  return Var::make(map(a.value(), [s](double v) { return v + s; }), {a},
                   [na](const Tensor& g) { na->accumulate(g); });
}

Var square(const Var& a) {
  auto na = a.node();
  return Var::make(map(a.value(), [](double v) { return v * v; }), {a},
                   [na](const Tensor& g) {
                     Tensor& slot = na->grad_slot();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       slot[i] += 2.0 * g[i] * na->value[i];
                     }
                   });
}

Var leaky_relu(const Var& x, double slope) {
  if (slope < 0.0) throw ContractError("leaky_relu slope must be >= 0");
  auto nx = x.node();
  return Var::make(
      map(x.value(), [slope](double v) { return v >= 0.0 ? v : slope * v; }),
      {x}, [nx, slope](const Tensor& g) {
        Tensor& slot = nx->grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) {
          slot[i] += nx->value[i] >= 0.0 ? g[i] : slope * g[i];
        }
      });
}

Var clamp(const Var& x, double lo, double hi) {
  auto nx = x.node();
  return Var::make(
      map(x.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); }),
      {x}, [nx, lo, hi](const Tensor& g) {
        Tensor& slot = nx->grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = nx->value[i];
          if (v >= lo && v <= hi) slot[i] += g[i];
        }
      });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  auto nx = x.node();
  return Var::make(Tensor::scalar(total), {x}, [nx](const Tensor& g) {
    Tensor& slot = nx->grad_slot();
    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[0];
  });
}

Var mean(const Var& x) {
  if (x.value().size() == 0) throw ContractError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var reshape(const Var& x, Shape shape) {
  auto nx = x.node();
  return Var::make(x.value().reshaped(shape), {x}, [nx](const Tensor& g) {
    nx->accumulate(g.reshaped(nx->value.shape()));
  });
}

std::pair<Var, Var> pairwise_softmax(const Var& a, const Var& b) {
  require_same_shape(a, b, "pairwise_softmax");
  Tensor pa(a.shape()), pb(a.shape());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double sa = a.value()[i], sb = b.value()[i];
    const double m = std::max(sa, sb);
    const double ea = std::exp(sa - m), eb = std::exp(sb - m);
    pa[i] = ea / (ea + eb);
    pb[i] = eb / (ea + eb);
  }
  // d first / d a = first * second, d first / d b = -first * second, and
  // symmetrically for the second output.
  auto na = a.node(), nb = b.node();
  auto make_backward = [na, nb, pa, pb](bool first) {
    return [na, nb, pa, pb, first](const Tensor& g) {
      const double sign = first ? 1.0 : -1.0;
      if (na->requires_grad) {
        Tensor& slot = na->grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) {
          slot[i] += sign * g[i] * pa[i] * pb[i];
        }
      }
      if (nb->requires_grad) {
        Tensor& slot = nb->grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) {
          slot[i] -= sign * g[i] * pa[i] * pb[i];
        }
      }
    };
  };
  Var first = Var::make(pa, {a, b}, make_backward(true));
  Var second = Var::make(pb, {a, b}, make_backward(false));
  return {first, second};
}

Var mse(const Var& a, const Var& b) { return mean(square(ew_sub(a, b))); }

}  // namespace urie
