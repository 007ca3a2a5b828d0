#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "urie/rng.hpp"
#include "urie/tensor.hpp"

namespace urie {

/// A node in the dynamic computation graph: a value, its gradient slot and
/// the closure that propagates the gradient to the parents.
struct Node {
  Tensor value;
  Tensor grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor& grad_out)> backward;

  Tensor& grad_slot();
  void accumulate(const Tensor& g);
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizer updates and checkpoint loading.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  /// Gradient, or zeros of the value's shape if none was accumulated.
  Tensor grad() const;
  void zero_grad() { node_->grad = Tensor(); }

  bool defined() const { return node_ != nullptr; }
  const std::shared_ptr<Node>& node() const { return node_; }

  /// Builds a result node. Parents that do not require grad are dropped; if
  /// none remain (or grad mode is off) the result is a constant leaf.
  static Var make(Tensor value, std::vector<Var> parents,
                  std::function<void(const Tensor&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

/// Runs reverse-mode accumulation from a scalar output, seeding with 1.
void backward(const Var& output);

/// Runs reverse-mode accumulation from an arbitrary output with an explicit
/// upstream gradient.
void backward(const Var& output, const Tensor& seed);

bool grad_enabled();

/// Disables graph construction for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Maximum coordinates probed per input; 0 probes all of them.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
};

/// Compares analytic gradients of a scalar function against central
/// differences. Returns max over probed coordinates of
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
///
/// `f` is re-evaluated for each perturbation and must build its graph from
/// the given inputs. Throws NumericError if `f` returns a non-finite value.
double grad_check(const std::function<Var()>& f, std::vector<Var> inputs,
                  const GradCheckOptions& opts = {});

/// Single-input convenience overload.
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                  double eps = 1e-5);

}  // namespace urie
