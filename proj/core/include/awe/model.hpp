#ifndef AWE_MODEL_HPP
#define AWE_MODEL_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "awe/common.hpp"

namespace awe {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class CellType { gru };

struct ModelConfig {
  int feature_dim = 13;
  int hidden_dim = 400;
  int n_layers = 3;
  int embedding_dim = 130;
  CellType cell = CellType::gru;
  bool with_decoder = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (feature_dim < 1 || hidden_dim < 1 || n_layers < 1 || embedding_dim < 1)
      throw Error("ModelConfig: all dims must be >= 1");
  }

  bool operator==(const ModelConfig&) const = default;
};

template <typename S>
struct Tensor {
  MatX<S> value;
  bool trainable = true;
};

// Gradients (and Adam moments) keyed by tensor name.
template <typename S>
using NamedMatrices = std::map<std::string, MatX<S>>;

// Named tensor collection for the encoder, projection, and (optionally)
// decoder plus output head.
//
// GRU convention, fixed across the project: per layer a fused input map
// w_ih (3H x in), recurrent map w_hh (3H x H) and bias b (3H), with gate
// rows ordered [reset; update; candidate]. Step:
//   r = sigmoid(w_ih_r x + w_hh_r h_prev + b_r)
//   z = sigmoid(w_ih_z x + w_hh_z h_prev + b_z)
//   n = tanh(w_ih_n x + b_n + r .* (w_hh_n h_prev))   // reset on recurrent term
//   h = (1 - z) .* h_prev + z .* n                    // z mixes the candidate in
//
// Tensor names: enc.<l>.{w_ih,w_hh,b}, proj.{w,b}, dec.<l>.{w_ih,w_hh,b},
// out.{w,b}. The first decoder layer's input width is embedding_dim; the
// output head maps hidden_dim -> feature_dim.
template <typename S>
struct ParametersT {
  ModelConfig config;
  std::map<std::string, Tensor<S>> tensors;

  bool has_decoder() const { return config.with_decoder; }

  const MatX<S>& value(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("unknown tensor '" + name + "'");
    return it->second.value;
  }

  MatX<S>& value(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("unknown tensor '" + name + "'");
    return it->second.value;
  }

  bool trainable(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("unknown tensor '" + name + "'");
    return it->second.trainable;
  }

  template <typename T>
  ParametersT<T> cast() const {
    ParametersT<T> out;
    out.config = config;
    for (const auto& [name, t] : tensors)
      out.tensors[name] = Tensor<T>{t.value.template cast<T>(), t.trainable};
    return out;
  }
};

using Parameters = ParametersT<float>;

namespace detail {

// Canonical tensor creation order; initialization fills values in this
// order, so two models with equal configs are bit-identical.
std::vector<std::string> tensor_creation_order(const ModelConfig& config);

// shape of a named tensor under a config: {rows, cols}
std::pair<int, int> tensor_shape(const ModelConfig& config, const std::string& name);

// fan-in used for the uniform init bound of a named tensor (0 for biases)
int tensor_fan_in(const ModelConfig& config, const std::string& name);

template <typename S>
MatX<S> init_tensor(const ModelConfig& config, const std::string& name, Rng& rng) {
  const auto [rows, cols] = tensor_shape(config, name);
  MatX<S> m(rows, cols);
  const int fan_in = tensor_fan_in(config, name);
  if (fan_in == 0) {
    m.setZero();
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        m(r, c) = static_cast<S>(rng.uniform(-bound, bound));
  }
  return m;
}

}  // namespace detail

// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero, all
// tensors trainable. Deterministic per config.seed.
template <typename S = float>
ParametersT<S> init_model(const ModelConfig& config) {
  config.validate();
  ParametersT<S> params;
  params.config = config;
  Rng rng(config.seed);
  for (const auto& name : detail::tensor_creation_order(config))
    params.tensors[name] = Tensor<S>{detail::init_tensor<S>(config, name, rng), true};
  return params;
}

// ---------------------------------------------------------------------------
// Forward/backward passes. Caches hold everything the backward pass needs.

template <typename S>
struct GruLayerCache {
  MatX<S> h;  // T x H, h.row(t) = state after step t
  MatX<S> r, z, n, c;  // T x H gate activations; c = w_hh_n * h_prev
};

template <typename S>
struct EncodeCache {
  std::vector<GruLayerCache<S>> layers;
  VecX<S> embedding;
};

template <typename S>
struct DecodeCache {
  std::vector<GruLayerCache<S>> layers;
  MatX<S> outputs;  // T_out x D
};

namespace detail {

template <typename S>
inline S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <typename S>
MatX<S>& grad_ref(NamedMatrices<S>& grads, const std::string& name) {
  auto it = grads.find(name);
  if (it == grads.end())
    throw Error("gradient entry missing for '" + name + "' (initialize with zero_grads)");
  return it->second;
}

// One stacked-GRU layer over a full sequence. inputs is T x in; the cache's
// h is the layer output sequence.
template <typename S>
void run_gru_layer(const MatX<S>& w_ih, const MatX<S>& w_hh, const MatX<S>& b,
                   const MatX<S>& inputs, GruLayerCache<S>& cache) {
  const Eigen::Index T = inputs.rows();
  const Eigen::Index H = w_hh.cols();
  cache.h.resize(T, H);
  cache.r.resize(T, H);
  cache.z.resize(T, H);
  cache.n.resize(T, H);
  cache.c.resize(T, H);

  // input contributions for all steps at once: 3H x T
  MatX<S> pre_x = (w_ih * inputs.transpose()).colwise() + VecX<S>(b.col(0));

  VecX<S> h_prev = VecX<S>::Zero(H);
  VecX<S> pre_h(3 * H), r(H), z(H), n(H), h(H);
  for (Eigen::Index t = 0; t < T; ++t) {
    pre_h.noalias() = w_hh * h_prev;
    for (Eigen::Index i = 0; i < H; ++i) {
      r(i) = sigmoid(pre_x(i, t) + pre_h(i));
      z(i) = sigmoid(pre_x(H + i, t) + pre_h(H + i));
    }
    auto c = pre_h.segment(2 * H, H);
    for (Eigen::Index i = 0; i < H; ++i)
      n(i) = std::tanh(pre_x(2 * H + i, t) + r(i) * c(i));
    h = (VecX<S>::Ones(H) - z).cwiseProduct(h_prev) + z.cwiseProduct(n);
    cache.r.row(t) = r.transpose();
    cache.z.row(t) = z.transpose();
    cache.n.row(t) = n.transpose();
    cache.c.row(t) = c.transpose();
    cache.h.row(t) = h.transpose();
    h_prev = h;
  }
}

// Reverse-mode pass for one layer. d_h_ext.row(t) is the loss gradient
// flowing directly into h_t (from the layer above or the head); returns the
// gradient w.r.t. the layer inputs and accumulates parameter gradients.
template <typename S>
MatX<S> gru_layer_backward(const MatX<S>& w_ih, const MatX<S>& w_hh,
                           const MatX<S>& inputs, const GruLayerCache<S>& cache,
                           const MatX<S>& d_h_ext, MatX<S>& g_w_ih,
                           MatX<S>& g_w_hh, MatX<S>& g_b) {
  const Eigen::Index T = inputs.rows();
  const Eigen::Index H = w_hh.cols();

  MatX<S> d_pre_x(3 * H, T);   // per-step gradients at the input pre-activations
  MatX<S> d_pre_h(3 * H, T);   // per-step gradients at the recurrent pre-activations
  VecX<S> carry = VecX<S>::Zero(H);  // dL/dh_t arriving from step t+1

  VecX<S> gh(H), dz(H), dn(H), dan(H), dr(H), dc(H), daz(H), dar(H);
  VecX<S> h_prev(H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    gh = d_h_ext.row(t).transpose() + carry;
    if (t > 0)
      h_prev = cache.h.row(t - 1).transpose();
    else
      h_prev.setZero();

    const auto r = cache.r.row(t).transpose();
    const auto z = cache.z.row(t).transpose();
    const auto n = cache.n.row(t).transpose();
    const auto c = cache.c.row(t).transpose();

    dz = gh.cwiseProduct(n - h_prev);
    dn = gh.cwiseProduct(z);
    carry = gh.cwiseProduct(VecX<S>::Ones(H) - z);  // direct h_prev path

    dan = dn.cwiseProduct(VecX<S>::Ones(H) - n.cwiseProduct(n));
    dr = dan.cwiseProduct(c);
    dc = dan.cwiseProduct(r);
    daz = dz.cwiseProduct(z).cwiseProduct(VecX<S>::Ones(H) - z);
    dar = dr.cwiseProduct(r).cwiseProduct(VecX<S>::Ones(H) - r);

    d_pre_x.col(t) << dar, daz, dan;
    d_pre_h.col(t) << dar, daz, dc;

    carry.noalias() += w_hh.transpose() * d_pre_h.col(t);
  }

  // parameter gradients as single products over the sequence
  g_w_ih.noalias() += d_pre_x * inputs;
  g_b.col(0).noalias() += d_pre_x.rowwise().sum();
  MatX<S> h_shifted(T, H);  // row t = h_{t-1}, zero row first
  h_shifted.row(0).setZero();
  if (T > 1) h_shifted.bottomRows(T - 1) = cache.h.topRows(T - 1);
  g_w_hh.noalias() += d_pre_h * h_shifted;

  return (w_ih.transpose() * d_pre_x).transpose();  // T x in
}

}  // namespace detail

// Stacked unidirectional GRU pass from a zero initial state; the embedding
// is an affine projection (no activation) of the top layer's final state.
template <typename S>
EncodeCache<S> encode_cached(const ParametersT<S>& params, const MatX<S>& frames) {
  const ModelConfig& cfg = params.config;
  if (frames.rows() < 1) throw Error("encode: T must be >= 1");
  if (frames.cols() != cfg.feature_dim)
    throw Error("encode: frame width " + std::to_string(frames.cols()) +
                " does not match feature_dim " + std::to_string(cfg.feature_dim));

  EncodeCache<S> cache;
  cache.layers.resize(cfg.n_layers);
  const MatX<S>* layer_input = &frames;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "enc." + std::to_string(l) + ".";
    detail::run_gru_layer(params.value(p + "w_ih"), params.value(p + "w_hh"),
                          params.value(p + "b"), *layer_input, cache.layers[l]);
    layer_input = &cache.layers[l].h;
  }
  const VecX<S> h_last = cache.layers.back().h.row(frames.rows() - 1).transpose();
  cache.embedding = params.value("proj.w") * h_last + params.value("proj.b").col(0);
  return cache;
}

template <typename S>
VecX<S> encode(const ParametersT<S>& params, const MatX<S>& frames) {
  return encode_cached(params, frames).embedding;
}

// Accumulates d(loss)/d(tensor) into grads for the encoder and projection,
// given the loss gradient at the embedding.
template <typename S>
void encode_backward(const ParametersT<S>& params, const MatX<S>& frames,
                     const EncodeCache<S>& cache, const VecX<S>& d_embedding,
                     NamedMatrices<S>& grads) {
  const ModelConfig& cfg = params.config;
  const Eigen::Index T = frames.rows();

  const VecX<S> h_last = cache.layers.back().h.row(T - 1).transpose();
  detail::grad_ref(grads, "proj.w").noalias() += d_embedding * h_last.transpose();
  detail::grad_ref(grads, "proj.b").col(0) += d_embedding;

  MatX<S> d_h_ext = MatX<S>::Zero(T, cfg.hidden_dim);
  d_h_ext.row(T - 1) = (params.value("proj.w").transpose() * d_embedding).transpose();

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const std::string p = "enc." + std::to_string(l) + ".";
    const MatX<S>& inputs = (l == 0) ? frames : cache.layers[l - 1].h;
    d_h_ext = detail::gru_layer_backward(
        params.value(p + "w_ih"), params.value(p + "w_hh"), inputs,
        cache.layers[l], d_h_ext, detail::grad_ref(grads, p + "w_ih"),
        detail::grad_ref(grads, p + "w_hh"), detail::grad_ref(grads, p + "b"));
    // d_h_ext is now the gradient w.r.t. this layer's inputs, which is the
    // external gradient of the layer below (or d frames at l == 0).
  }
}

// Decoder: the embedding is fed as the input at every step (no feedback of
// previous outputs); per-step output is an affine head on the top layer.
template <typename S>
DecodeCache<S> decode_cached(const ParametersT<S>& params, const VecX<S>& embedding,
                             Eigen::Index t_out) {
  const ModelConfig& cfg = params.config;
  if (!params.has_decoder()) throw Error("decode: model has no decoder");
  if (t_out < 1) throw Error("decode: T_out must be >= 1");
  if (embedding.size() != cfg.embedding_dim)
    throw Error("decode: embedding width " + std::to_string(embedding.size()) +
                " does not match embedding_dim " + std::to_string(cfg.embedding_dim));

  DecodeCache<S> cache;
  cache.layers.resize(cfg.n_layers);
  MatX<S> repeated = embedding.transpose().replicate(t_out, 1);
  const MatX<S>* layer_input = &repeated;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "dec." + std::to_string(l) + ".";
    detail::run_gru_layer(params.value(p + "w_ih"), params.value(p + "w_hh"),
                          params.value(p + "b"), *layer_input, cache.layers[l]);
    layer_input = &cache.layers[l].h;
  }
  cache.outputs.noalias() =
      cache.layers.back().h * params.value("out.w").transpose();
  cache.outputs.rowwise() += params.value("out.b").col(0).transpose();
  return cache;
}

template <typename S>
MatX<S> decode(const ParametersT<S>& params, const VecX<S>& embedding,
               Eigen::Index t_out) {
  return decode_cached(params, embedding, t_out).outputs;
}

// Accumulates decoder/head gradients given d(loss)/d(outputs); adds the
// gradient w.r.t. the embedding into d_embedding.
template <typename S>
void decode_backward(const ParametersT<S>& params, const VecX<S>& embedding,
                     const DecodeCache<S>& cache, const MatX<S>& d_outputs,
                     NamedMatrices<S>& grads, VecX<S>& d_embedding) {
  const ModelConfig& cfg = params.config;
  const Eigen::Index T = d_outputs.rows();

  detail::grad_ref(grads, "out.w").noalias() +=
      d_outputs.transpose() * cache.layers.back().h;
  detail::grad_ref(grads, "out.b").col(0) += d_outputs.colwise().sum().transpose();

  MatX<S> d_h_ext = d_outputs * params.value("out.w");  // T x H
  MatX<S> repeated = embedding.transpose().replicate(T, 1);
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const std::string p = "dec." + std::to_string(l) + ".";
    const MatX<S>& inputs = (l == 0) ? repeated : cache.layers[l - 1].h;
    d_h_ext = detail::gru_layer_backward(
        params.value(p + "w_ih"), params.value(p + "w_hh"), inputs,
        cache.layers[l], d_h_ext, detail::grad_ref(grads, p + "w_ih"),
        detail::grad_ref(grads, p + "w_hh"), detail::grad_ref(grads, p + "b"));
  }
  d_embedding += d_h_ext.colwise().sum().transpose();  // input repeats each step
}

// Zero-filled gradient holder covering every tensor. Backward passes
// accumulate through frozen tensors too (gradients still flow past them);
// the optimizer is what ignores non-trainable entries.
template <typename S>
NamedMatrices<S> zero_grads(const ParametersT<S>& params) {
  NamedMatrices<S> grads;
  for (const auto& [name, t] : params.tensors)
    grads[name] = MatX<S>::Zero(t.value.rows(), t.value.cols());
  return grads;
}

}  // namespace awe

#endif  // AWE_MODEL_HPP
