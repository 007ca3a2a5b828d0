#include "urie/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace urie {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor& Node::grad_slot() {
  if (grad.empty() && value.size() != 0) grad = Tensor::zeros(value.shape());
  return grad;
}

void Node::accumulate(const Tensor& g) {
  Tensor& slot = grad_slot();
  if (g.shape() != slot.shape()) {
    throw ContractError("gradient shape " + g.shape().str() +
                        " does not match value " + slot.shape().str());
  }
  for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
}

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor::zeros(node_->value.shape());
  return node_->grad;
}

Var Var::make(Tensor value, std::vector<Var> parents,
              std::function<void(const Tensor&)> backward) {
  Var out(std::move(value));
  if (!g_grad_enabled) return out;
  for (auto& p : parents) {
    if (p.requires_grad()) out.node_->parents.push_back(p.node_);
  }
  if (!out.node_->parents.empty()) {
    out.node_->requires_grad = true;
    out.node_->backward = std::move(backward);
  }
  return out;
}

namespace {

std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS; deep graphs would overflow a recursive walk.
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Var& output, const Tensor& seed) {
  if (!output.requires_grad()) return;
  Node* root = output.node().get();
  root->accumulate(seed);
  auto order = topo_order(root);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(node->grad);
  }
}

void backward(const Var& output) {
  if (output.value().size() != 1) {
    throw ContractError("backward() without a seed needs a scalar output, got " +
                        output.shape().str());
  }
  backward(output, Tensor::ones(output.shape()));
}

double grad_check(const std::function<Var()>& f, std::vector<Var> inputs,
                  const GradCheckOptions& opts) {
  if (opts.eps <= 0.0) throw ContractError("grad_check eps must be positive");
  std::vector<bool> previous_flags;
  for (auto& in : inputs) {
    previous_flags.push_back(in.requires_grad());
    in.set_requires_grad(true);
    in.zero_grad();
  }
  Var out = f();
  if (out.value().size() != 1 || !std::isfinite(out.value()[0])) {
    throw NumericError("grad_check: function must return a finite scalar");
  }
  backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in.grad());

  auto eval = [&] {
    NoGradGuard guard;
    const double v = f().value()[0];
    if (!std::isfinite(v)) {
      throw NumericError("grad_check: function returned non-finite value");
    }
    return v;
  };

  Rng rng(opts.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = inputs[k].mutable_value();
    std::vector<std::size_t> coords(x.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (opts.max_coords_per_input != 0 &&
        coords.size() > opts.max_coords_per_input) {
      // Partial Fisher-Yates: the first max_coords entries are a uniform
      // sample without replacement.
      for (std::size_t i = 0; i < opts.max_coords_per_input; ++i) {
        const std::size_t j = i + rng.below(coords.size() - i);
        std::swap(coords[i], coords[j]);
      }
      coords.resize(opts.max_coords_per_input);
    }
    for (std::size_t i : coords) {
      const double orig = x[i];
      x[i] = orig + opts.eps;
      const double up = eval();
      x[i] = orig - opts.eps;
      const double down = eval();
      x[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.eps);
      const double a = analytic[k][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].set_requires_grad(previous_flags[k]);
    inputs[k].zero_grad();
  }
  return worst;
}

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                  double eps) {
  Var input(x, true);
  GradCheckOptions opts;
  opts.eps = eps;
  return grad_check([&] { return f(input); }, {input}, opts);
}

}  // namespace urie
