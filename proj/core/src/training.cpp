#include "awe/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "awe/eval.hpp"
#include "awe/objectives.hpp"

namespace awe {

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::ae: return "ae";
    case Objective::cae: return "cae";
    case Objective::triplet: return "triplet";
    case Objective::contrastive: return "contrastive";
  }
  return "unknown";
}

Objective objective_from_string(const std::string& s) {
  if (s == "ae") return Objective::ae;
  if (s == "cae") return Objective::cae;
  if (s == "triplet") return Objective::triplet;
  if (s == "contrastive") return Objective::contrastive;
  throw Error("unknown objective '" + s + "' (expected ae|cae|triplet|contrastive)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw Error("TrainConfig: epochs must be >= 0");
  if (ae_pretrain_epochs < 0) throw Error("TrainConfig: ae_pretrain_epochs must be >= 0");
  if (batch_p < 2 || batch_k < 2) throw Error("TrainConfig: batch_p and batch_k must be >= 2");
  if (pairs_per_batch < 2) throw Error("TrainConfig: pairs_per_batch must be >= 2");
  if (recon_batch < 1) throw Error("TrainConfig: recon_batch must be >= 1");
  if (adam.lr <= 0.0) throw Error("TrainConfig: lr must be > 0");
  if (margin < 0.0) throw Error("TrainConfig: margin must be >= 0");
  if (temperature <= 0.0) throw Error("TrainConfig: temperature must be > 0");
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw Error("config key '" + key + "': expected a boolean, got '" + v + "'");
}

}  // namespace

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("'" + path + "' line " + std::to_string(line_no) +
                  ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "objective") base.objective = objective_from_string(value);
      else if (key == "epochs") base.epochs = std::stoi(value);
      else if (key == "ae_pretrain_epochs") base.ae_pretrain_epochs = std::stoi(value);
      else if (key == "batch_p") base.batch_p = std::stoi(value);
      else if (key == "batch_k") base.batch_k = std::stoi(value);
      else if (key == "pairs_per_batch") base.pairs_per_batch = std::stoi(value);
      else if (key == "recon_batch") base.recon_batch = std::stoi(value);
      else if (key == "lr") base.adam.lr = std::stod(value);
      else if (key == "beta1") base.adam.beta1 = std::stod(value);
      else if (key == "beta2") base.adam.beta2 = std::stod(value);
      else if (key == "epsilon") base.adam.epsilon = std::stod(value);
      else if (key == "clip_norm") base.clip_norm = std::stod(value);
      else if (key == "margin") base.margin = std::stod(value);
      else if (key == "temperature") base.temperature = std::stod(value);
      else if (key == "symmetrize") base.symmetrize = parse_bool(value, key);
      else if (key == "patience") base.patience = std::stoi(value);
      else if (key == "pair_cap") base.pair_cap = std::stoull(value);
      else if (key == "dev_cross_speaker") base.dev_cross_speaker = parse_bool(value, key);
      else if (key == "seed") base.seed = std::stoull(value);
      else throw Error("'" + path + "' line " + std::to_string(line_no) +
                       ": unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw Error("'" + path + "' line " + std::to_string(line_no) +
                  ": bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw Error("'" + path + "' line " + std::to_string(line_no) +
                  ": value out of range for '" + key + "'");
    }
  }
  return base;
}

std::vector<std::size_t> apportion_pair_quotas(
    const std::vector<std::size_t>& available, std::size_t cap) {
  std::size_t total = 0;
  for (std::size_t a : available) total += a;
  if (cap >= total) return available;

  std::vector<std::size_t> quota(available.size());
  std::vector<double> frac(available.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < available.size(); ++i) {
    const double share = static_cast<double>(cap) *
                         static_cast<double>(available[i]) /
                         static_cast<double>(total);
    quota[i] = std::min(available[i], static_cast<std::size_t>(std::floor(share)));
    frac[i] = share - static_cast<double>(quota[i]);
    assigned += quota[i];
  }
  while (assigned < cap) {
    std::size_t best = available.size();
    for (std::size_t i = 0; i < available.size(); ++i)
      if (quota[i] < available[i] && (best == available.size() || frac[i] > frac[best]))
        best = i;
    ++quota[best];
    frac[best] = -1.0;
    ++assigned;
  }
  return quota;
}

namespace {

MatX<float> frames_of(const SegmentStore& store, std::size_t idx) {
  return store[idx].frames;
}

// Indices of the distinct segments referenced by the pair list, ascending.
std::vector<std::size_t> paired_segment_indices(const SegmentStore& store,
                                                const PairList& pairs) {
  std::set<std::size_t> uniq;
  for (const auto& [a, b] : pairs.pairs) {
    uniq.insert(store.index_of(a));
    uniq.insert(store.index_of(b));
  }
  return {uniq.begin(), uniq.end()};
}

struct LoopOutcome {
  Parameters params;
  TrainReport report;
};

// The shared epoch loop for all self-supervised regimes. `store` must
// already be label-stripped; dev (when present) keeps its labels for AP
// validation.
LoopOutcome run_loop(Parameters params, const SegmentStore& store,
                     const PairList& pairs, const TrainConfig& config,
                     const SegmentStore* dev) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  if (pairs.empty()) throw Error("training requires a non-empty pair list");
  pairs.validate_against(store);
  if ((config.objective == Objective::ae || config.objective == Objective::cae) &&
      !params.has_decoder())
    throw Error("objective '" + to_string(config.objective) +
                "' requires a model with a decoder");

  const TripletHyper triplet_hyper{config.margin};
  const ContrastiveHyper contrastive_hyper{config.temperature,
                                           config.pairs_per_batch,
                                           config.symmetrize};

  const std::vector<std::size_t> paired = paired_segment_indices(store, pairs);
  TypeGroups pseudo_types;
  if (config.objective == Objective::triplet)
    pseudo_types = groups_from_pairs(store, pairs);

  AdamStateT<float> adam = adam_init(params, config.adam);
  TrainReport report;

  Parameters best_params = params;
  double best_ap = -1.0;
  int best_epoch = -1;
  int evals_since_best = 0;

  const int pretrain_epochs =
      (config.objective == Objective::cae) ? config.ae_pretrain_epochs : 0;
  const int total_epochs = pretrain_epochs + config.epochs;

  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(config.seed, 0x7261'696eULL, epoch);
    Rng rng(epoch_seed);
    const bool in_pretrain = epoch < pretrain_epochs;

    double loss_sum = 0.0;
    int steps = 0;
    auto take_step = [&](const BatchLoss<float>& batch_loss) {
      try {
        auto [loss, grads] = compute_gradients(params, batch_loss);
        clip_gradients(params, grads, config.clip_norm);
        adam_step(params, grads, adam);
        loss_sum += static_cast<double>(loss);
        ++steps;
      } catch (const Error& e) {
        throw Error("epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
    };

    if (config.objective == Objective::ae || in_pretrain) {
      std::vector<std::size_t> order = paired;
      rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += config.recon_batch) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(config.recon_batch));
        std::vector<MatX<float>> inputs;
        inputs.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i)
          inputs.push_back(frames_of(store, order[i]));
        take_step(ReconstructionBatchLoss<float>::autoencoder(std::move(inputs)));
      }
    } else if (config.objective == Objective::cae) {
      // every stored pair contributes both directions each epoch
      std::vector<std::pair<std::size_t, std::size_t>> examples;
      examples.reserve(2 * pairs.size());
      for (const auto& [a, b] : pairs.pairs) {
        const std::size_t ia = store.index_of(a);
        const std::size_t ib = store.index_of(b);
        examples.emplace_back(ia, ib);
        examples.emplace_back(ib, ia);
      }
      rng.shuffle(examples);
      for (std::size_t start = 0; start < examples.size(); start += config.recon_batch) {
        const std::size_t stop =
            std::min(examples.size(), start + static_cast<std::size_t>(config.recon_batch));
        std::vector<MatX<float>> inputs, targets;
        inputs.reserve(stop - start);
        targets.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
          inputs.push_back(frames_of(store, examples[i].first));
          targets.push_back(frames_of(store, examples[i].second));
        }
        take_step(ReconstructionBatchLoss<float>(std::move(inputs), std::move(targets)));
      }
    } else if (config.objective == Objective::triplet) {
      for (const PKBatch& batch :
           build_pk_batches(pseudo_types, config.batch_p, config.batch_k, epoch_seed)) {
        std::vector<MatX<float>> frames;
        frames.reserve(batch.segment_indices.size());
        for (std::size_t idx : batch.segment_indices)
          frames.push_back(frames_of(store, idx));
        take_step(TripletBatchLoss<float>(std::move(frames), batch.type_of,
                                          triplet_hyper));
      }
    } else {
      for (const ContrastiveBatch& batch : build_contrastive_batches(
               store, pairs, config.pairs_per_batch, epoch_seed)) {
        std::vector<MatX<float>> frames;
        frames.reserve(2 * batch.pair_indices.size());
        for (const auto& [a, b] : batch.pair_indices) {
          frames.push_back(frames_of(store, a));
          frames.push_back(frames_of(store, b));
        }
        take_step(ContrastiveBatchLoss<float>(std::move(frames), contrastive_hyper));
      }
    }

    report.epoch_loss.push_back(steps > 0 ? loss_sum / steps : 0.0);
    report.epoch_steps.push_back(steps);

    if (dev != nullptr) {
      const EmbeddingSet dev_emb = embed_all(params, *dev);
      const APResult dev_ap = same_different_ap(dev_emb, config.dev_cross_speaker);
      report.epoch_dev_ap.push_back(dev_ap.ap);
      if (dev_ap.ap > best_ap) {
        best_ap = dev_ap.ap;
        best_params = params;
        best_epoch = epoch;
        evals_since_best = 0;
      } else if (!in_pretrain) {
        ++evals_since_best;
        if (config.patience > 0 && evals_since_best >= config.patience) break;
      }
    }
  }

  LoopOutcome out{dev != nullptr && best_epoch >= 0 ? std::move(best_params)
                                                    : std::move(params),
                  std::move(report)};
  out.report.best_epoch = dev != nullptr
                              ? best_epoch
                              : static_cast<int>(out.report.epoch_loss.size()) - 1;
  out.report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return out;
}

std::string join_sorted_unique(std::vector<std::string> items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

Provenance make_provenance(const TrainConfig& config, const PairList& pairs,
                           const std::string& stage,
                           const std::string& source_languages) {
  Provenance prov;
  prov.fields["objective"] = to_string(config.objective);
  prov.fields["stage"] = stage;
  prov.fields["source_languages"] = source_languages;
  prov.fields["pair_provenance"] = to_string(pairs.provenance);
  if (pairs.claimed_precision)
    prov.fields["claimed_precision"] = std::to_string(*pairs.claimed_precision);
  prov.fields["seed"] = std::to_string(config.seed);
  return prov;
}

}  // namespace

std::pair<Checkpoint, TrainReport> train_monolingual(
    const SegmentStore& store, const PairList& pairs,
    const ModelConfig& model_config, const TrainConfig& config,
    const SegmentStore* dev) {
  model_config.validate();
  if (model_config.feature_dim != store.feature_dim())
    throw Error("train_monolingual: model feature_dim does not match store");
  const SegmentStore stripped = strip_labels(store);
  Parameters params = init_model<float>(model_config);
  LoopOutcome outcome = run_loop(std::move(params), stripped, pairs, config, dev);

  Checkpoint checkpoint{std::move(outcome.params),
                        make_provenance(config, pairs, "monolingual",
                                        join_sorted_unique(store.languages()))};
  return {std::move(checkpoint), std::move(outcome.report)};
}

std::pair<Checkpoint, TrainReport> train_multilingual(
    const std::vector<const SegmentStore*>& stores,
    const ModelConfig& model_config, const TrainConfig& config,
    const SegmentStore& dev_language) {
  if (stores.empty()) throw Error("train_multilingual: no training stores");
  for (const SegmentStore* s : stores)
    if (!s->fully_labeled())
      throw Error("train_multilingual: every training store must be labeled");

  // the validation language must be unseen
  {
    std::set<std::string> train_langs;
    for (const SegmentStore* s : stores)
      for (const auto& lang : s->languages()) train_langs.insert(lang);
    for (const auto& lang : dev_language.languages())
      if (train_langs.count(lang))
        throw Error("train_multilingual: validation language '" + lang +
                    "' appears in the training stores");
  }

  // proportional-to-availability sampling of positive pairs, capped
  std::vector<std::size_t> available;
  available.reserve(stores.size());
  std::size_t total = 0;
  for (const SegmentStore* s : stores) {
    available.push_back(count_ground_truth_pairs(*s));
    total += available.back();
  }
  if (total == 0) throw Error("train_multilingual: no same-label pair exists");
  const std::vector<std::size_t> quota =
      apportion_pair_quotas(available, config.pair_cap);

  std::vector<const SegmentStore*> parts(stores.begin(), stores.end());
  SegmentStore pooled = merge_stores(parts);
  PairList pooled_pairs;
  pooled_pairs.provenance = PairProvenance::ground_truth;
  pooled_pairs.claimed_precision = 1.0;
  for (std::size_t i = 0; i < stores.size(); ++i) {
    if (quota[i] == 0) continue;
    PairList part = ground_truth_pairs(*stores[i], quota[i],
                                       derive_seed(config.seed, 0x706f'6f6cULL, i));
    pooled_pairs.pairs.insert(pooled_pairs.pairs.end(), part.pairs.begin(),
                              part.pairs.end());
  }

  std::vector<std::string> langs;
  for (const SegmentStore* s : stores)
    for (const auto& lang : s->languages()) langs.push_back(lang);

  const SegmentStore stripped = strip_labels(pooled);
  Parameters params = init_model<float>(model_config);
  LoopOutcome outcome =
      run_loop(std::move(params), stripped, pooled_pairs, config, &dev_language);

  Checkpoint checkpoint{std::move(outcome.params),
                        make_provenance(config, pooled_pairs, "multilingual",
                                        join_sorted_unique(std::move(langs)))};
  return {std::move(checkpoint), std::move(outcome.report)};
}

std::pair<Checkpoint, TrainReport> adapt(const Checkpoint& checkpoint,
                                         const SegmentStore& target_store,
                                         const PairList& target_pairs,
                                         const AdaptationPolicy& policy,
                                         const TrainConfig& config,
                                         const SegmentStore* dev) {
  if (checkpoint.params.config.feature_dim != target_store.feature_dim())
    throw Error("adapt: checkpoint feature_dim does not match target store");
  if ((config.objective == Objective::ae || config.objective == Objective::cae) &&
      !checkpoint.params.has_decoder())
    throw Error("adapt: objective '" + to_string(config.objective) +
                "' requires a checkpoint with a decoder");

  Parameters params = apply_adaptation_policy(checkpoint, policy);
  const SegmentStore stripped = strip_labels(target_store);

  LoopOutcome outcome;
  if (config.epochs == 0 && (config.objective != Objective::cae ||
                             config.ae_pretrain_epochs == 0)) {
    outcome.params = std::move(params);
    outcome.report.best_epoch = -1;
  } else {
    outcome = run_loop(std::move(params), stripped, target_pairs, config, dev);
  }

  Provenance prov = make_provenance(config, target_pairs, "adapted",
                                    checkpoint.provenance.has("source_languages")
                                        ? checkpoint.provenance.get("source_languages")
                                        : std::string());
  prov.fields["target_language"] = join_sorted_unique(target_store.languages());
  prov.fields["policy"] = to_string(policy.policy);

  return {Checkpoint{std::move(outcome.params), std::move(prov)},
          std::move(outcome.report)};
}

}  // namespace awe
