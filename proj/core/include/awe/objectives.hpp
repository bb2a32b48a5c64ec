#ifndef AWE_OBJECTIVES_HPP
#define AWE_OBJECTIVES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "awe/model.hpp"
#include "awe/pairs.hpp"
#include "awe/segment.hpp"

namespace awe {

// ---------------------------------------------------------------------------
// Cosine similarity space. A zero-norm vector has similarity 0 (distance 1)
// to everything and contributes no gradient.

inline constexpr double kNormFloor = 1e-12;

template <typename S>
S cosine_similarity(const VecX<S>& u, const VecX<S>& v) {
  const S nu = u.norm();
  const S nv = v.norm();
  if (nu < S(kNormFloor) || nv < S(kNormFloor)) return S(0);
  return u.dot(v) / (nu * nv);
}

template <typename S>
S cosine_distance(const VecX<S>& u, const VecX<S>& v) {
  return S(1) - cosine_similarity(u, v);
}

// Accumulates coef * d sim(u, v) / d{u, v} into gu, gv.
template <typename S>
void add_cosine_similarity_grad(const VecX<S>& u, const VecX<S>& v, S coef,
                                VecX<S>& gu, VecX<S>& gv) {
  const S nu = u.norm();
  const S nv = v.norm();
  if (nu < S(kNormFloor) || nv < S(kNormFloor)) return;
  const S sim = u.dot(v) / (nu * nv);
  gu += coef * (v / (nu * nv) - sim * u / (nu * nu));
  gv += coef * (u / (nu * nv) - sim * v / (nv * nv));
}

// ---------------------------------------------------------------------------
// Loss hyperparameters.

struct TripletHyper {
  double margin = 0.25;

  void validate() const {
    if (margin < 0.0) throw Error("TripletHyper: margin must be >= 0");
  }
};

struct ContrastiveHyper {
  double temperature = 0.1;
  int pairs_per_batch = 16;   // N; each anchor sees 2(N-1) negatives
  bool symmetrize = false;    // also anchor each pair's second element

  void validate() const {
    if (temperature <= 0.0) throw Error("ContrastiveHyper: temperature must be > 0");
    if (pairs_per_batch < 2) throw Error("ContrastiveHyper: pairs_per_batch must be >= 2");
  }
};

// ---------------------------------------------------------------------------
// Reconstruction losses (sum of squared per-frame errors, no length
// normalization). The decoder is unrolled for the target's length.

template <typename S>
S cae_loss(const ParametersT<S>& params, const MatX<S>& x, const MatX<S>& x_target) {
  if (x.cols() != x_target.cols())
    throw Error("cae_loss: input and target widths differ");
  const VecX<S> emb = encode(params, x);
  const MatX<S> y = decode(params, emb, x_target.rows());
  return (x_target - y).squaredNorm();
}

template <typename S>
S ae_loss(const ParametersT<S>& params, const MatX<S>& x) {
  return cae_loss(params, x, x);
}

// ---------------------------------------------------------------------------
// Triplet loss with online batch-hard mining. For each anchor, the most
// distant same-label item and the closest different-label item are selected;
// per-anchor hinge max{0, m + d(a,p*) - d(a,n*)}, mean over anchors.
// Requires >= 2 labels and >= 2 instances of every label. Ties break toward
// the lowest index.

namespace detail {

template <typename S>
S triplet_batch_hard_impl(const std::vector<VecX<S>>& emb,
                          const std::vector<int>& labels, double margin,
                          std::vector<VecX<S>>* d_emb) {
  const std::size_t b = emb.size();
  if (labels.size() != b) throw Error("triplet loss: labels/embeddings size mismatch");
  if (b < 2) throw Error("triplet loss: batch too small");

  std::vector<std::size_t> label_count;
  for (int l : labels) {
    if (l < 0) throw Error("triplet loss: negative label");
    if (static_cast<std::size_t>(l) >= label_count.size())
      label_count.resize(static_cast<std::size_t>(l) + 1, 0);
    ++label_count[static_cast<std::size_t>(l)];
  }
  std::size_t distinct = 0;
  for (std::size_t c : label_count) distinct += (c > 0);
  if (distinct < 2) throw Error("triplet loss: batch needs >= 2 distinct labels");
  for (std::size_t i = 0; i < b; ++i)
    if (label_count[static_cast<std::size_t>(labels[i])] < 2)
      throw Error("triplet loss: a label has a single instance in the batch");

  MatX<S> sim(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    sim(i, i) = S(1);
    for (std::size_t j = i + 1; j < b; ++j) {
      const S s = cosine_similarity(emb[i], emb[j]);
      sim(i, j) = s;
      sim(j, i) = s;
    }
  }

  S total = S(0);
  const S inv_b = S(1) / static_cast<S>(b);
  for (std::size_t a = 0; a < b; ++a) {
    std::size_t hardest_pos = b, hardest_neg = b;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (hardest_pos == b || sim(a, j) < sim(a, hardest_pos)) hardest_pos = j;
      } else {
        if (hardest_neg == b || sim(a, j) > sim(a, hardest_neg)) hardest_neg = j;
      }
    }
    // d(a,p) - d(a,n) = sim(a,n) - sim(a,p)
    const S hinge = S(margin) + sim(a, hardest_neg) - sim(a, hardest_pos);
    if (hinge > S(0)) {
      total += hinge;
      if (d_emb) {
        add_cosine_similarity_grad(emb[a], emb[hardest_neg], inv_b,
                                   (*d_emb)[a], (*d_emb)[hardest_neg]);
        add_cosine_similarity_grad(emb[a], emb[hardest_pos], -inv_b,
                                   (*d_emb)[a], (*d_emb)[hardest_pos]);
      }
    }
  }
  return total * inv_b;
}

}  // namespace detail

template <typename S>
S triplet_loss_batch_hard(const std::vector<VecX<S>>& embeddings,
                          const std::vector<int>& labels,
                          const TripletHyper& hyper) {
  hyper.validate();
  return detail::triplet_batch_hard_impl<S>(embeddings, labels, hyper.margin,
                                            nullptr);
}

template <typename S>
S triplet_loss_batch_hard_grad(const std::vector<VecX<S>>& embeddings,
                               const std::vector<int>& labels,
                               const TripletHyper& hyper,
                               std::vector<VecX<S>>& d_embeddings) {
  hyper.validate();
  d_embeddings.assign(embeddings.size(), VecX<S>());
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    d_embeddings[i] = VecX<S>::Zero(embeddings[i].size());
  return detail::triplet_batch_hard_impl<S>(embeddings, labels, hyper.margin,
                                            &d_embeddings);
}

// ---------------------------------------------------------------------------
// Temperature-scaled contrastive loss over N positive pairs. Embeddings are
// ordered (a_0, p_0, a_1, p_1, ...). For each pair the anchor's softmax runs
// over the other 2N-1 items (its positive plus 2(N-1) negatives); the result
// is the SUM over the N pair terms.

namespace detail {

template <typename S>
S contrastive_impl(const std::vector<VecX<S>>& emb, double temperature,
                   bool symmetrize, std::vector<VecX<S>>* d_emb) {
  const std::size_t m = emb.size();
  if (m < 4 || m % 2 != 0)
    throw Error("contrastive loss: need N >= 2 positive pairs (2N embeddings)");
  const std::size_t n_pairs = m / 2;
  const S inv_tau = S(1) / S(temperature);

  MatX<S> sim(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    sim(i, i) = S(1);
    for (std::size_t j = i + 1; j < m; ++j) {
      const S s = cosine_similarity(emb[i], emb[j]);
      sim(i, j) = s;
      sim(j, i) = s;
    }
  }

  const auto pair_term = [&](std::size_t anchor, std::size_t positive) -> S {
    // stable log-sum-exp over all items except the anchor itself
    S max_logit = std::numeric_limits<S>::lowest();
    for (std::size_t j = 0; j < m; ++j) {
      if (j == anchor) continue;
      max_logit = std::max(max_logit, sim(anchor, j) * inv_tau);
    }
    S sum = S(0);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == anchor) continue;
      sum += std::exp(sim(anchor, j) * inv_tau - max_logit);
    }
    const S lse = max_logit + std::log(sum);
    if (d_emb) {
      for (std::size_t j = 0; j < m; ++j) {
        if (j == anchor) continue;
        const S softmax_j = std::exp(sim(anchor, j) * inv_tau - lse);
        const S coef = (softmax_j - (j == positive ? S(1) : S(0))) * inv_tau;
        add_cosine_similarity_grad(emb[anchor], emb[j], coef, (*d_emb)[anchor],
                                   (*d_emb)[j]);
      }
    }
    return lse - sim(anchor, positive) * inv_tau;
  };

  S total = S(0);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    total += pair_term(2 * i, 2 * i + 1);
    if (symmetrize) total += pair_term(2 * i + 1, 2 * i);
  }
  return total;
}

}  // namespace detail

template <typename S>
S contrastive_loss(const std::vector<VecX<S>>& embeddings,
                   const ContrastiveHyper& hyper) {
  hyper.validate();
  return detail::contrastive_impl<S>(embeddings, hyper.temperature,
                                     hyper.symmetrize, nullptr);
}

template <typename S>
S contrastive_loss_grad(const std::vector<VecX<S>>& embeddings,
                        const ContrastiveHyper& hyper,
                        std::vector<VecX<S>>& d_embeddings) {
  hyper.validate();
  d_embeddings.assign(embeddings.size(), VecX<S>());
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    d_embeddings[i] = VecX<S>::Zero(embeddings[i].size());
  return detail::contrastive_impl<S>(embeddings, hyper.temperature,
                                     hyper.symmetrize, &d_embeddings);
}

// ---------------------------------------------------------------------------
// Differentiable batch objectives: a closure over one batch that can report
// its value and its exact reverse-mode gradients through the model.

template <typename S>
class BatchLoss {
 public:
  virtual ~BatchLoss() = default;
  virtual S value(const ParametersT<S>& params) const = 0;
  // grads must come from zero_grads(params); accumulates into it.
  virtual S value_and_grad(const ParametersT<S>& params,
                           NamedMatrices<S>& grads) const = 0;
};

// Mean of per-example reconstruction losses. An autoencoder batch passes
// each segment as its own target.
template <typename S>
class ReconstructionBatchLoss final : public BatchLoss<S> {
 public:
  ReconstructionBatchLoss(std::vector<MatX<S>> inputs, std::vector<MatX<S>> targets)
      : inputs_(std::move(inputs)), targets_(std::move(targets)) {
    if (inputs_.size() != targets_.size() || inputs_.empty())
      throw Error("reconstruction batch: need matching non-empty inputs/targets");
  }

  static ReconstructionBatchLoss autoencoder(std::vector<MatX<S>> inputs) {
    std::vector<MatX<S>> targets = inputs;
    return ReconstructionBatchLoss(std::move(inputs), std::move(targets));
  }

  S value(const ParametersT<S>& params) const override {
    S total = S(0);
    for (std::size_t e = 0; e < inputs_.size(); ++e)
      total += cae_loss(params, inputs_[e], targets_[e]);
    return total / static_cast<S>(inputs_.size());
  }

  S value_and_grad(const ParametersT<S>& params,
                   NamedMatrices<S>& grads) const override {
    S total = S(0);
    const S scale = S(1) / static_cast<S>(inputs_.size());
    for (std::size_t e = 0; e < inputs_.size(); ++e) {
      const auto enc = encode_cached(params, inputs_[e]);
      const auto dec = decode_cached(params, enc.embedding, targets_[e].rows());
      const MatX<S> residual = dec.outputs - targets_[e];
      total += residual.squaredNorm();
      VecX<S> d_emb = VecX<S>::Zero(enc.embedding.size());
      const MatX<S> d_outputs = S(2) * scale * residual;
      decode_backward(params, enc.embedding, dec, d_outputs, grads, d_emb);
      encode_backward(params, inputs_[e], enc, d_emb, grads);
    }
    return total * scale;
  }

 private:
  std::vector<MatX<S>> inputs_;
  std::vector<MatX<S>> targets_;
};

// Batch-hard triplet objective over a P-types-x-K-instances batch.
template <typename S>
class TripletBatchLoss final : public BatchLoss<S> {
 public:
  TripletBatchLoss(std::vector<MatX<S>> frames, std::vector<int> labels,
                   TripletHyper hyper)
      : frames_(std::move(frames)), labels_(std::move(labels)), hyper_(hyper) {
    hyper_.validate();
  }

  S value(const ParametersT<S>& params) const override {
    std::vector<VecX<S>> emb;
    emb.reserve(frames_.size());
    for (const auto& f : frames_) emb.push_back(encode(params, f));
    return triplet_loss_batch_hard(emb, labels_, hyper_);
  }

  S value_and_grad(const ParametersT<S>& params,
                   NamedMatrices<S>& grads) const override {
    std::vector<EncodeCache<S>> caches;
    std::vector<VecX<S>> emb;
    caches.reserve(frames_.size());
    emb.reserve(frames_.size());
    for (const auto& f : frames_) {
      caches.push_back(encode_cached(params, f));
      emb.push_back(caches.back().embedding);
    }
    std::vector<VecX<S>> d_emb;
    const S loss = triplet_loss_batch_hard_grad(emb, labels_, hyper_, d_emb);
    for (std::size_t i = 0; i < frames_.size(); ++i)
      encode_backward(params, frames_[i], caches[i], d_emb[i], grads);
    return loss;
  }

 private:
  std::vector<MatX<S>> frames_;
  std::vector<int> labels_;
  TripletHyper hyper_;
};

// Contrastive objective over N positive pairs; frames ordered
// (a_0, p_0, a_1, p_1, ...).
template <typename S>
class ContrastiveBatchLoss final : public BatchLoss<S> {
 public:
  ContrastiveBatchLoss(std::vector<MatX<S>> frames, ContrastiveHyper hyper)
      : frames_(std::move(frames)), hyper_(hyper) {
    hyper_.validate();
    if (frames_.size() % 2 != 0 || frames_.size() < 4)
      throw Error("contrastive batch: need 2N frames with N >= 2");
  }

  S value(const ParametersT<S>& params) const override {
    std::vector<VecX<S>> emb;
    emb.reserve(frames_.size());
    for (const auto& f : frames_) emb.push_back(encode(params, f));
    return contrastive_loss(emb, hyper_);
  }

  S value_and_grad(const ParametersT<S>& params,
                   NamedMatrices<S>& grads) const override {
    std::vector<EncodeCache<S>> caches;
    std::vector<VecX<S>> emb;
    caches.reserve(frames_.size());
    emb.reserve(frames_.size());
    for (const auto& f : frames_) {
      caches.push_back(encode_cached(params, f));
      emb.push_back(caches.back().embedding);
    }
    std::vector<VecX<S>> d_emb;
    const S loss = contrastive_loss_grad(emb, hyper_, d_emb);
    for (std::size_t i = 0; i < frames_.size(); ++i)
      encode_backward(params, frames_[i], caches[i], d_emb[i], grads);
    return loss;
  }

 private:
  std::vector<MatX<S>> frames_;
  ContrastiveHyper hyper_;
};

// Runs one reverse-mode evaluation. The returned map holds an entry for
// every tensor (frozen ones included; the optimizer skips those). Throws on
// a non-finite loss.
template <typename S>
std::pair<S, NamedMatrices<S>> compute_gradients(const ParametersT<S>& params,
                                                 const BatchLoss<S>& loss_fn) {
  NamedMatrices<S> grads = zero_grads(params);
  const S loss = loss_fn.value_and_grad(params, grads);
  if (!std::isfinite(static_cast<double>(loss)))
    throw Error("non-finite loss (divergence)");
  return {loss, std::move(grads)};
}

// ---------------------------------------------------------------------------
// Batch construction. Types are word labels when a labeled store is the
// source, or pair-graph connected components ("pseudo-types") when pairs
// are. Both builders are deterministic per seed.

// One group per type: member store indices.
struct TypeGroups {
  std::vector<std::vector<std::size_t>> groups;
};

TypeGroups groups_from_labels(const SegmentStore& store);
TypeGroups groups_from_pairs(const SegmentStore& store, const PairList& pairs);

struct PKBatch {
  std::vector<std::size_t> segment_indices;  // store indices
  std::vector<int> type_of;                  // parallel pseudo-type ids
};

// One epoch of P-types-x-K-instances batches: eligible types (>= k members)
// are shuffled and consumed in chunks of p, each contributing k sampled
// instances. A trailing chunk with >= 2 types is kept.
std::vector<PKBatch> build_pk_batches(const TypeGroups& groups, int p, int k,
                                      std::uint64_t seed);
std::vector<PKBatch> build_pk_batches(const SegmentStore& store, int p, int k,
                                      std::uint64_t seed);
std::vector<PKBatch> build_pk_batches(const SegmentStore& store,
                                      const PairList& pairs, int p, int k,
                                      std::uint64_t seed);

struct ContrastiveBatch {
  // store-index pairs (anchor, positive); claimed types pairwise distinct
  std::vector<std::pair<std::size_t, std::size_t>> pair_indices;
};

// One epoch of N-pair batches over shuffled pairs; a batch never holds two
// pairs of the same claimed type. Pairs that cannot join a full batch this
// epoch are dropped (a later epoch's shuffle sees them again).
std::vector<ContrastiveBatch> build_contrastive_batches(const SegmentStore& store,
                                                        const PairList& pairs,
                                                        int n, std::uint64_t seed);

}  // namespace awe

#endif  // AWE_OBJECTIVES_HPP
