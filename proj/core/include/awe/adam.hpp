#ifndef AWE_ADAM_HPP
#define AWE_ADAM_HPP

#include <cmath>

#include "awe/model.hpp"

namespace awe {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Moments exist only for trainable tensors; frozen
// tensors are never touched.
template <typename S>
struct AdamStateT {
  long long step = 0;
  AdamHyper hyper;
  NamedMatrices<S> m;  // first moments
  NamedMatrices<S> v;  // second moments
};

using AdamState = AdamStateT<float>;

template <typename S>
AdamStateT<S> adam_init(const ParametersT<S>& params, const AdamHyper& hyper = {}) {
  AdamStateT<S> state;
  state.hyper = hyper;
  for (const auto& [name, t] : params.tensors) {
    if (!t.trainable) continue;
    state.m[name] = MatX<S>::Zero(t.value.rows(), t.value.cols());
    state.v[name] = MatX<S>::Zero(t.value.rows(), t.value.cols());
  }
  return state;
}

// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), with
// m_hat = m / (1 - beta1^t) and v_hat = v / (1 - beta2^t).
template <typename S>
void adam_step(ParametersT<S>& params, const NamedMatrices<S>& grads,
               AdamStateT<S>& state) {
  const AdamHyper& h = state.hyper;
  ++state.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));

  for (auto& [name, t] : params.tensors) {
    if (!t.trainable) continue;
    auto git = grads.find(name);
    if (git == grads.end())
      throw Error("adam_step: no gradient for trainable tensor '" + name + "'");
    const MatX<S>& g = git->second;
    if (g.rows() != t.value.rows() || g.cols() != t.value.cols())
      throw Error("adam_step: gradient shape mismatch for '" + name + "'");

    MatX<S>& m = state.m.at(name);
    MatX<S>& v = state.v.at(name);
    m = S(h.beta1) * m + S(1.0 - h.beta1) * g;
    v = S(h.beta2) * v + S(1.0 - h.beta2) * g.cwiseProduct(g);
    t.value.array() -= S(h.lr) * (m.array() / S(bc1)) /
                       ((v.array() / S(bc2)).sqrt() + S(h.epsilon));
  }
}

// Global L2 norm over every gradient entry of trainable tensors.
template <typename S>
double global_grad_norm(const ParametersT<S>& params, const NamedMatrices<S>& grads) {
  double sq = 0.0;
  for (const auto& [name, t] : params.tensors) {
    if (!t.trainable) continue;
    auto it = grads.find(name);
    if (it != grads.end()) sq += static_cast<double>(it->second.squaredNorm());
  }
  return std::sqrt(sq);
}

// Scales all trainable-tensor gradients so the global norm is at most
// max_norm. max_norm <= 0 disables clipping. Returns the pre-clip norm.
template <typename S>
double clip_gradients(const ParametersT<S>& params, NamedMatrices<S>& grads,
                      double max_norm) {
  const double norm = global_grad_norm(params, grads);
  if (max_norm > 0.0 && norm > max_norm && norm > 0.0) {
    const S scale = static_cast<S>(max_norm / norm);
    for (auto& [name, g] : grads)
      if (params.tensors.count(name) && params.tensors.at(name).trainable)
        g *= scale;
  }
  return norm;
}

}  // namespace awe

#endif  // AWE_ADAM_HPP
