#include "urie/optim.hpp"

#include <cmath>

namespace urie {

AdamState AdamState::for_params(const ParamList& params, AdamConfig config) {
  AdamState st;
  st.config = config;
  for (const auto& p : params) {
    if (!p.trainable) continue;
    st.m.push_back(Tensor::zeros(p.var.shape()));
    st.v.push_back(Tensor::zeros(p.var.shape()));
  }
  return st;
}

void adam_step(const ParamList& params, AdamState& st, double lr) {
  std::vector<const NamedParam*> trainable;
  for (const auto& p : params) {
    if (p.trainable) trainable.push_back(&p);
  }
  if (trainable.size() != st.m.size()) {
    throw ContractError("Adam state does not match the parameter list");
  }
  for (const NamedParam* p : trainable) {
    if (p->var.has_grad() && !p->var.node()->grad.all_finite()) {
      throw NumericError("non-finite gradient for " + p->name);
    }
  }
  ++st.step;
  const auto& c = st.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < trainable.size(); ++k) {
    Var var = trainable[k]->var;
    Tensor& m = st.m[k];
    Tensor& v = st.v[k];
    if (m.shape() != var.shape()) {
      throw ContractError("Adam moment shape mismatch for " + trainable[k]->name);
    }
    Tensor& w = var.mutable_value();
    const bool has = var.has_grad();
    const Tensor* g = has ? &var.node()->grad : nullptr;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has ? (*g)[i] : 0.0;
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

void zero_grads(const ParamList& params) {
  for (auto p : params) p.var.zero_grad();
}

}  // namespace urie
