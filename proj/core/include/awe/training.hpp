#ifndef AWE_TRAINING_HPP
#define AWE_TRAINING_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "awe/adam.hpp"
#include "awe/checkpoint.hpp"
#include "awe/pairs.hpp"
#include "awe/segment.hpp"

namespace awe {

enum class Objective { ae, cae, triplet, contrastive };

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& s);

struct TrainConfig {
  Objective objective = Objective::contrastive;
  int epochs = 20;
  int ae_pretrain_epochs = 5;  // cae only; runs before the correspondence phase
  int batch_p = 16;            // triplet: types per batch
  int batch_k = 4;             // triplet: instances per type
  int pairs_per_batch = 16;    // contrastive N
  int recon_batch = 1;         // ae/cae examples per gradient step
  AdamHyper adam;
  double clip_norm = 5.0;      // global-norm gradient clip; <= 0 disables
  double margin = 0.25;
  double temperature = 0.1;
  bool symmetrize = false;
  int patience = 5;            // dev evaluations without improvement; <= 0 disables
  std::size_t pair_cap = 300000;  // multilingual pooled positive-pair cap
  bool dev_cross_speaker = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Flat key-value file ("key = value", '#' comments) with TrainConfig field
// names; unknown keys are errors. Values override the passed-in base.
TrainConfig load_train_config(const std::string& path, TrainConfig base = {});

// Largest-remainder apportionment of min(cap, sum(available)) positive pairs
// across sources, proportional to availability; a quota never exceeds its
// source's availability.
std::vector<std::size_t> apportion_pair_quotas(
    const std::vector<std::size_t>& available, std::size_t cap);

struct TrainReport {
  std::vector<double> epoch_loss;    // mean step loss per epoch actually run
  std::vector<double> epoch_dev_ap;  // parallel to epoch_loss; empty without dev
  std::vector<int> epoch_steps;      // gradient steps per epoch
  double wall_clock_sec = 0.0;
  int best_epoch = -1;               // epoch of the returned parameters
};

// Self-supervised training on pairs over one store. The training path only
// ever sees a label-stripped copy of the store: for cae, autoencoder
// pretraining on the paired segments then correspondence training with each
// pair used in both directions; for triplet/contrastive, pseudo-types come
// from the pair graph. Returns the best-dev-AP checkpoint when dev is given,
// the final one otherwise.
std::pair<Checkpoint, TrainReport> train_monolingual(
    const SegmentStore& store, const PairList& pairs,
    const ModelConfig& model_config, const TrainConfig& config,
    const SegmentStore* dev = nullptr);

// Supervised pooled training: ground-truth positive pairs are sampled per
// store proportionally to availability (capped at config.pair_cap), pooled,
// and fed through the same loop. dev_language must not share a language with
// the training stores.
std::pair<Checkpoint, TrainReport> train_multilingual(
    const std::vector<const SegmentStore*>& stores,
    const ModelConfig& model_config, const TrainConfig& config,
    const SegmentStore& dev_language);

// Applies the adaptation policy to the checkpoint, then runs the
// self-supervised loop on the target pairs. epochs = 0 returns the
// policy-applied parameters unchanged.
std::pair<Checkpoint, TrainReport> adapt(const Checkpoint& checkpoint,
                                         const SegmentStore& target_store,
                                         const PairList& target_pairs,
                                         const AdaptationPolicy& policy,
                                         const TrainConfig& config,
                                         const SegmentStore* dev = nullptr);

}  // namespace awe

#endif  // AWE_TRAINING_HPP
