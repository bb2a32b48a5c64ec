#include "cli.hpp"

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "awe/archive.hpp"
#include "awe/checkpoint.hpp"
#include "awe/common.hpp"
#include "awe/eval.hpp"
#include "awe/objectives.hpp"
#include "awe/pairs.hpp"
#include "awe/segment.hpp"
#include "awe/training.hpp"

namespace awe::cli {

namespace {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::uint64_t config_hash(const std::string& command, const KeyValues& kv) {
  std::string canonical = command;
  KeyValues sorted = kv;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& [k, v] : sorted) canonical += '\n' + k + '=' + v;
  return fnv1a(canonical);
}

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void print_provenance(const std::string& command, std::uint64_t seed,
                      std::uint64_t hash) {
  std::cout << "awe " << kVersion << " cmd=" << command << " seed=" << seed
            << " config_hash=" << hash_hex(hash) << "\n";
}

// Training flags shared by train, train-multi and adapt. Flags the user
// actually passed override the config file, which overrides the defaults.
struct TrainFlags {
  std::string config_path;
  std::string objective;
  int epochs = 0;
  int ae_pretrain_epochs = 0;
  int batch_p = 0;
  int batch_k = 0;
  int pairs_per_batch = 0;
  int recon_batch = 0;
  double lr = 0.0;
  double clip_norm = 0.0;
  double margin = 0.0;
  double temperature = 0.0;
  bool symmetrize = false;
  int patience = 0;
  std::uint64_t pair_cap = 0;

  CLI::Option* o_objective = nullptr;
  CLI::Option* o_epochs = nullptr;
  CLI::Option* o_ae_pretrain = nullptr;
  CLI::Option* o_batch_p = nullptr;
  CLI::Option* o_batch_k = nullptr;
  CLI::Option* o_pairs_per_batch = nullptr;
  CLI::Option* o_recon_batch = nullptr;
  CLI::Option* o_lr = nullptr;
  CLI::Option* o_clip_norm = nullptr;
  CLI::Option* o_margin = nullptr;
  CLI::Option* o_temperature = nullptr;
  CLI::Option* o_symmetrize = nullptr;
  CLI::Option* o_patience = nullptr;
  CLI::Option* o_pair_cap = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "Training config file (key = value lines)");
    o_objective = cmd->add_option("--objective", objective,
                                  "Objective: ae|cae|triplet|contrastive");
    o_epochs = cmd->add_option("--epochs", epochs, "Training epochs");
    o_ae_pretrain = cmd->add_option("--ae-pretrain-epochs", ae_pretrain_epochs,
                                    "Autoencoder pretraining epochs (cae)");
    o_batch_p = cmd->add_option("--p-types", batch_p, "Types per triplet batch");
    o_batch_k = cmd->add_option("--k-instances", batch_k,
                                "Instances per type per triplet batch");
    o_pairs_per_batch = cmd->add_option("--pairs-per-batch", pairs_per_batch,
                                        "Positive pairs per contrastive batch");
    o_recon_batch = cmd->add_option("--recon-batch", recon_batch,
                                    "Examples per ae/cae gradient step");
    o_lr = cmd->add_option("--lr", lr, "Adam learning rate");
    o_clip_norm = cmd->add_option("--clip-norm", clip_norm,
                                  "Global-norm gradient clip (<= 0 disables)");
    o_margin = cmd->add_option("--margin", margin, "Triplet margin");
    o_temperature = cmd->add_option("--temperature", temperature,
                                    "Contrastive temperature");
    o_symmetrize = cmd->add_option("--symmetrize", symmetrize,
                                   "Also anchor each pair's second element");
    o_patience = cmd->add_option("--patience", patience,
                                 "Early-stop patience in dev evaluations");
    o_pair_cap = cmd->add_option("--pair-cap", pair_cap,
                                 "Pooled positive-pair cap (train-multi)");
  }

  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig tc;
    if (!config_path.empty()) tc = load_train_config(config_path, tc);
    if (o_objective->count()) tc.objective = objective_from_string(objective);
    if (o_epochs->count()) tc.epochs = epochs;
    if (o_ae_pretrain->count()) tc.ae_pretrain_epochs = ae_pretrain_epochs;
    if (o_batch_p->count()) tc.batch_p = batch_p;
    if (o_batch_k->count()) tc.batch_k = batch_k;
    if (o_pairs_per_batch->count()) tc.pairs_per_batch = pairs_per_batch;
    if (o_recon_batch->count()) tc.recon_batch = recon_batch;
    if (o_lr->count()) tc.adam.lr = lr;
    if (o_clip_norm->count()) tc.clip_norm = clip_norm;
    if (o_margin->count()) tc.margin = margin;
    if (o_temperature->count()) tc.temperature = temperature;
    if (o_symmetrize->count()) tc.symmetrize = symmetrize;
    if (o_patience->count()) tc.patience = patience;
    if (o_pair_cap->count()) tc.pair_cap = pair_cap;
    tc.seed = seed;
    return tc;
  }

  KeyValues describe(const TrainConfig& tc) const {
    return {{"objective", to_string(tc.objective)},
            {"epochs", std::to_string(tc.epochs)},
            {"ae_pretrain_epochs", std::to_string(tc.ae_pretrain_epochs)},
            {"batch_p", std::to_string(tc.batch_p)},
            {"batch_k", std::to_string(tc.batch_k)},
            {"pairs_per_batch", std::to_string(tc.pairs_per_batch)},
            {"recon_batch", std::to_string(tc.recon_batch)},
            {"lr", format_double(tc.adam.lr)},
            {"clip_norm", format_double(tc.clip_norm)},
            {"margin", format_double(tc.margin)},
            {"temperature", format_double(tc.temperature)},
            {"symmetrize", tc.symmetrize ? "1" : "0"},
            {"patience", std::to_string(tc.patience)},
            {"pair_cap", std::to_string(tc.pair_cap)}};
  }
};

struct ModelFlags {
  int hidden = 64;
  int layers = 3;
  int emb_dim = 32;

  void attach(CLI::App* cmd) {
    cmd->add_option("--hidden", hidden, "Hidden state width per layer");
    cmd->add_option("--layers", layers, "Stacked recurrent layers");
    cmd->add_option("--emb-dim", emb_dim, "Embedding width");
  }

  ModelConfig resolve(int feature_dim, bool with_decoder, std::uint64_t seed) const {
    ModelConfig mc;
    mc.feature_dim = feature_dim;
    mc.hidden_dim = hidden;
    mc.n_layers = layers;
    mc.embedding_dim = emb_dim;
    mc.with_decoder = with_decoder;
    mc.seed = seed;
    return mc;
  }

  KeyValues describe() const {
    return {{"hidden", std::to_string(hidden)},
            {"layers", std::to_string(layers)},
            {"emb_dim", std::to_string(emb_dim)}};
  }
};

void print_report(const TrainReport& report) {
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    std::cout << "epoch=" << (e + 1) << " steps=" << report.epoch_steps[e]
              << " loss=" << format_double(report.epoch_loss[e]);
    if (e < report.epoch_dev_ap.size())
      std::cout << " dev_ap=" << format_double(report.epoch_dev_ap[e]);
    std::cout << "\n";
  }
  std::cout << "best_epoch=" << (report.best_epoch + 1)
            << " wall_clock_sec=" << format_double(report.wall_clock_sec) << "\n";
}

EmbeddingSet resolve_embeddings(const std::string& emb_path,
                                const std::string& checkpoint_path,
                                const std::string& features_path, bool raw,
                                int threads) {
  if (!emb_path.empty()) return load_embeddings(emb_path);
  if (features_path.empty())
    throw Error("need either --emb or --features");
  const SegmentStore store = load_segments(features_path);
  if (raw) return mean_pooled_features(store);
  if (checkpoint_path.empty())
    throw Error("need --checkpoint with --features (or --raw for pooled features)");
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  return embed_all(ckpt.params, store, threads);
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Acoustic word embedding toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "Master seed; all randomness derives from it")
      ->capture_default_str();
  app.add_option("--threads", threads, "Worker threads for evaluation")
      ->capture_default_str();

  // synth-data ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic feature archive");
  SyntheticConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output archive path")->required();
  synth->add_option("--word-types", synth_cfg.n_word_types, "Distinct word types");
  synth->add_option("--speakers", synth_cfg.n_speakers, "Speakers");
  synth->add_option("--instances", synth_cfg.instances_per_type_per_speaker,
                    "Instances per type per speaker");
  synth->add_option("--min-len", synth_cfg.template_length_min, "Min template frames");
  synth->add_option("--max-len", synth_cfg.template_length_max, "Max template frames");
  synth->add_option("--jitter", synth_cfg.length_jitter, "Length jitter fraction");
  synth->add_option("--noise-sigma", synth_cfg.noise_sigma, "Frame noise stddev");
  synth->add_option("--gain-sigma", synth_cfg.speaker_gain_sigma,
                    "Speaker gain stddev");
  synth->add_option("--offset-sigma", synth_cfg.speaker_offset_sigma,
                    "Speaker offset stddev");
  synth->add_option("--feature-dim", synth_cfg.feature_dim, "Feature width");
  synth->add_option("--language", synth_cfg.language_id, "Language id");

  // mine-pairs ---------------------------------------------------------------
  auto* mine = app.add_subcommand("mine-pairs", "Mine positive pairs from an archive");
  std::string mine_features, mine_out, mine_mode = "utd";
  std::size_t mine_n_pairs = 1000;
  double mine_precision = 0.7;
  std::size_t mine_max_pairs = std::numeric_limits<std::size_t>::max();
  mine->add_option("--features", mine_features, "Input archive")->required();
  mine->add_option("--out", mine_out, "Output pair file")->required();
  mine->add_option("--mode", mine_mode, "utd | ground-truth")
      ->check(CLI::IsMember({"utd", "ground-truth"}));
  mine->add_option("--n-pairs", mine_n_pairs, "Pairs to mine (utd)");
  mine->add_option("--precision", mine_precision, "Fraction of correct pairs (utd)");
  mine->add_option("--max-pairs", mine_max_pairs, "Pair cap (ground-truth)");

  // train --------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Self-supervised training on one store");
  std::string train_features, train_pairs, train_dev, train_out;
  TrainFlags train_flags;
  ModelFlags train_model;
  train->add_option("--features", train_features, "Training archive")->required();
  train->add_option("--pairs", train_pairs, "Pair file")->required();
  train->add_option("--dev", train_dev, "Validation archive (labeled)");
  train->add_option("--out", train_out, "Output checkpoint")->required();
  train_flags.attach(train);
  train_model.attach(train);

  // train-multi ----------------------------------------------------------------
  auto* multi = app.add_subcommand("train-multi",
                                   "Supervised pooled training on labeled stores");
  std::vector<std::string> multi_features;
  std::string multi_dev, multi_out;
  TrainFlags multi_flags;
  ModelFlags multi_model;
  multi->add_option("--features", multi_features,
                    "Labeled training archives (repeatable)")
      ->required()
      ->expected(-1);
  multi->add_option("--dev", multi_dev, "Held-out validation-language archive")
      ->required();
  multi->add_option("--out", multi_out, "Output checkpoint")->required();
  multi_flags.attach(multi);
  multi_model.attach(multi);

  // adapt ----------------------------------------------------------------------
  auto* adapt_cmd = app.add_subcommand("adapt", "Adapt a checkpoint to a target store");
  std::string adapt_ckpt, adapt_features, adapt_pairs, adapt_dev, adapt_out;
  std::string adapt_policy = "full";
  std::uint64_t adapt_reinit_seed = 0;
  bool adapt_reinit_given = false;
  TrainFlags adapt_flags;
  adapt_cmd->add_option("--checkpoint", adapt_ckpt, "Source checkpoint")->required();
  adapt_cmd->add_option("--features", adapt_features, "Target archive")->required();
  adapt_cmd->add_option("--pairs", adapt_pairs, "Target pair file")->required();
  adapt_cmd->add_option("--dev", adapt_dev, "Validation archive (labeled)");
  adapt_cmd->add_option("--out", adapt_out, "Output checkpoint")->required();
  adapt_cmd->add_option("--policy", adapt_policy, "cae | full")
      ->check(CLI::IsMember({"cae", "full"}));
  auto* o_reinit = adapt_cmd->add_option("--reinit-seed", adapt_reinit_seed,
                                         "Decoder re-init seed (cae policy)");
  adapt_flags.attach(adapt_cmd);

  // embed ----------------------------------------------------------------------
  auto* embed_cmd = app.add_subcommand("embed", "Embed an archive with a checkpoint");
  std::string embed_ckpt, embed_features, embed_out;
  embed_cmd->add_option("--checkpoint", embed_ckpt, "Checkpoint")->required();
  embed_cmd->add_option("--features", embed_features, "Input archive")->required();
  embed_cmd->add_option("--out", embed_out, "Output embedding file")->required();

  // eval-ap ----------------------------------------------------------------------
  auto* evalap = app.add_subcommand("eval-ap",
                                    "Same-different AP of embeddings");
  std::string evalap_ckpt, evalap_features, evalap_emb, evalap_out;
  bool evalap_cross = true;
  evalap->add_option("--checkpoint", evalap_ckpt, "Checkpoint");
  evalap->add_option("--features", evalap_features, "Labeled archive");
  evalap->add_option("--emb", evalap_emb, "Precomputed embedding file");
  evalap->add_option("--cross-speaker", evalap_cross,
                     "Count positives across speakers only")
      ->capture_default_str();
  evalap->add_option("--out", evalap_out, "Result file");

  // eval-dtw ---------------------------------------------------------------------
  auto* evaldtw = app.add_subcommand("eval-dtw", "Same-different AP with DTW on frames");
  std::string evaldtw_features, evaldtw_out;
  bool evaldtw_cross = true;
  evaldtw->add_option("--features", evaldtw_features, "Labeled archive")->required();
  evaldtw->add_option("--cross-speaker", evaldtw_cross,
                      "Count positives across speakers only")
      ->capture_default_str();
  evaldtw->add_option("--out", evaldtw_out, "Result file");

  // probe-speaker -------------------------------------------------------------------
  auto* probe = app.add_subcommand("probe-speaker",
                                   "Linear speaker-identity probe on embeddings");
  std::string probe_ckpt, probe_features, probe_emb, probe_out;
  bool probe_raw = false;
  double probe_train_fraction = 0.8;
  probe->add_option("--checkpoint", probe_ckpt, "Checkpoint");
  probe->add_option("--features", probe_features, "Labeled archive");
  probe->add_option("--emb", probe_emb, "Precomputed embedding file");
  probe->add_flag("--raw", probe_raw, "Probe mean-pooled raw features instead");
  probe->add_option("--train-fraction", probe_train_fraction, "Train split fraction")
      ->capture_default_str();
  probe->add_option("--out", probe_out, "Result file");

  // export ---------------------------------------------------------------------------
  auto* export_cmd = app.add_subcommand("export", "Export embeddings as a text table");
  std::string export_ckpt, export_features, export_emb, export_out;
  export_cmd->add_option("--checkpoint", export_ckpt, "Checkpoint");
  export_cmd->add_option("--features", export_features, "Labeled archive");
  export_cmd->add_option("--emb", export_emb, "Precomputed embedding file");
  export_cmd->add_option("--out", export_out, "Output TSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      synth_cfg.seed = seed;
      KeyValues kv = {{"out", synth_out},
                      {"word_types", std::to_string(synth_cfg.n_word_types)},
                      {"speakers", std::to_string(synth_cfg.n_speakers)},
                      {"instances", std::to_string(synth_cfg.instances_per_type_per_speaker)},
                      {"min_len", std::to_string(synth_cfg.template_length_min)},
                      {"max_len", std::to_string(synth_cfg.template_length_max)},
                      {"jitter", format_double(synth_cfg.length_jitter)},
                      {"noise_sigma", format_double(synth_cfg.noise_sigma)},
                      {"gain_sigma", format_double(synth_cfg.speaker_gain_sigma)},
                      {"offset_sigma", format_double(synth_cfg.speaker_offset_sigma)},
                      {"feature_dim", std::to_string(synth_cfg.feature_dim)},
                      {"language", synth_cfg.language_id},
                      {"seed", std::to_string(seed)}};
      print_provenance("synth-data", seed, config_hash("synth-data", kv));
      const SegmentStore store = generate_synthetic(synth_cfg);
      save_segments(store, synth_out);
      std::cout << "segments=" << store.size() << "\nwrote " << synth_out << "\n";
    } else if (mine->parsed()) {
      KeyValues kv = {{"features", mine_features},
                      {"out", mine_out},
                      {"mode", mine_mode},
                      {"n_pairs", std::to_string(mine_n_pairs)},
                      {"precision", format_double(mine_precision)},
                      {"seed", std::to_string(seed)}};
      print_provenance("mine-pairs", seed, config_hash("mine-pairs", kv));
      const SegmentStore store = load_segments(mine_features);
      const PairList pairs =
          mine_mode == "utd"
              ? simulate_utd_pairs(store, mine_n_pairs, mine_precision, seed)
              : ground_truth_pairs(store, mine_max_pairs, seed);
      save_pairs(pairs, mine_out);
      std::cout << "pairs=" << pairs.size() << "\nwrote " << mine_out << "\n";
    } else if (train->parsed()) {
      const TrainConfig tc = train_flags.resolve(seed);
      KeyValues kv = train_flags.describe(tc);
      const KeyValues mk = train_model.describe();
      kv.insert(kv.end(), mk.begin(), mk.end());
      kv.emplace_back("features", train_features);
      kv.emplace_back("pairs", train_pairs);
      kv.emplace_back("dev", train_dev);
      kv.emplace_back("seed", std::to_string(seed));
      print_provenance("train", seed, config_hash("train", kv));

      const SegmentStore store = load_segments(train_features);
      const PairList pairs = load_pairs(train_pairs);
      std::optional<SegmentStore> dev;
      if (!train_dev.empty()) dev = load_segments(train_dev);
      const bool with_decoder =
          tc.objective == Objective::ae || tc.objective == Objective::cae;
      const ModelConfig mc =
          train_model.resolve(store.feature_dim(), with_decoder, seed);
      auto [ckpt, report] =
          train_monolingual(store, pairs, mc, tc, dev ? &*dev : nullptr);
      print_report(report);
      save_checkpoint(ckpt, train_out);
      std::cout << "checkpoint=" << train_out << "\n";
    } else if (multi->parsed()) {
      const TrainConfig tc = multi_flags.resolve(seed);
      KeyValues kv = multi_flags.describe(tc);
      const KeyValues mk = multi_model.describe();
      kv.insert(kv.end(), mk.begin(), mk.end());
      for (std::size_t i = 0; i < multi_features.size(); ++i)
        kv.emplace_back("features" + std::to_string(i), multi_features[i]);
      kv.emplace_back("dev", multi_dev);
      kv.emplace_back("seed", std::to_string(seed));
      print_provenance("train-multi", seed, config_hash("train-multi", kv));

      std::vector<SegmentStore> stores;
      stores.reserve(multi_features.size());
      for (const auto& path : multi_features) stores.push_back(load_segments(path));
      std::vector<const SegmentStore*> store_ptrs;
      for (const auto& s : stores) store_ptrs.push_back(&s);
      const SegmentStore dev = load_segments(multi_dev);
      const bool with_decoder =
          tc.objective == Objective::ae || tc.objective == Objective::cae;
      const ModelConfig mc =
          multi_model.resolve(stores.front().feature_dim(), with_decoder, seed);
      auto [ckpt, report] = train_multilingual(store_ptrs, mc, tc, dev);
      print_report(report);
      save_checkpoint(ckpt, multi_out);
      std::cout << "checkpoint=" << multi_out << "\n";
    } else if (adapt_cmd->parsed()) {
      const TrainConfig tc = adapt_flags.resolve(seed);
      adapt_reinit_given = o_reinit->count() > 0;
      AdaptationPolicy policy;
      policy.policy = policy_from_string(adapt_policy);
      policy.reinit_seed = adapt_reinit_given ? adapt_reinit_seed : seed;
      KeyValues kv = adapt_flags.describe(tc);
      kv.emplace_back("checkpoint", adapt_ckpt);
      kv.emplace_back("features", adapt_features);
      kv.emplace_back("pairs", adapt_pairs);
      kv.emplace_back("dev", adapt_dev);
      kv.emplace_back("policy", adapt_policy);
      kv.emplace_back("reinit_seed", std::to_string(policy.reinit_seed));
      kv.emplace_back("seed", std::to_string(seed));
      print_provenance("adapt", seed, config_hash("adapt", kv));

      const Checkpoint source = load_checkpoint(adapt_ckpt);
      const SegmentStore store = load_segments(adapt_features);
      const PairList pairs = load_pairs(adapt_pairs);
      std::optional<SegmentStore> dev;
      if (!adapt_dev.empty()) dev = load_segments(adapt_dev);
      auto [ckpt, report] =
          adapt(source, store, pairs, policy, tc, dev ? &*dev : nullptr);
      print_report(report);
      save_checkpoint(ckpt, adapt_out);
      std::cout << "checkpoint=" << adapt_out << "\n";
    } else if (embed_cmd->parsed()) {
      KeyValues kv = {{"checkpoint", embed_ckpt},
                      {"features", embed_features},
                      {"out", embed_out},
                      {"seed", std::to_string(seed)}};
      print_provenance("embed", seed, config_hash("embed", kv));
      const Checkpoint ckpt = load_checkpoint(embed_ckpt);
      const SegmentStore store = load_segments(embed_features);
      const EmbeddingSet set = embed_all(ckpt.params, store, threads);
      save_embeddings(set, embed_out);
      std::cout << "embeddings=" << set.size() << "\nwrote " << embed_out << "\n";
    } else if (evalap->parsed()) {
      KeyValues kv = {{"checkpoint", evalap_ckpt},
                      {"features", evalap_features},
                      {"emb", evalap_emb},
                      {"cross_speaker", evalap_cross ? "1" : "0"},
                      {"seed", std::to_string(seed)}};
      const std::uint64_t hash = config_hash("eval-ap", kv);
      print_provenance("eval-ap", seed, hash);
      const EmbeddingSet set = resolve_embeddings(evalap_emb, evalap_ckpt,
                                                  evalap_features, false, threads);
      const APResult r = same_different_ap(set, evalap_cross, threads);
      std::cout << "ap=" << format_double(r.ap)
                << " n_positive_pairs=" << r.n_positive_pairs
                << " n_total_pairs=" << r.n_total_pairs << "\n";
      if (!evalap_out.empty())
        write_result_file(evalap_out,
                          {{"metric", "same_different_ap"},
                           {"value", format_double(r.ap)},
                           {"n_positive_pairs", std::to_string(r.n_positive_pairs)},
                           {"n_total_pairs", std::to_string(r.n_total_pairs)},
                           {"cross_speaker", r.cross_speaker ? "1" : "0"},
                           {"seed", std::to_string(seed)},
                           {"config_hash", hash_hex(hash)}});
    } else if (evaldtw->parsed()) {
      KeyValues kv = {{"features", evaldtw_features},
                      {"cross_speaker", evaldtw_cross ? "1" : "0"},
                      {"seed", std::to_string(seed)}};
      const std::uint64_t hash = config_hash("eval-dtw", kv);
      print_provenance("eval-dtw", seed, hash);
      const SegmentStore store = load_segments(evaldtw_features);
      const APResult r = dtw_ap(store, evaldtw_cross, threads);
      std::cout << "ap=" << format_double(r.ap)
                << " n_positive_pairs=" << r.n_positive_pairs
                << " n_total_pairs=" << r.n_total_pairs << "\n";
      if (!evaldtw_out.empty())
        write_result_file(evaldtw_out,
                          {{"metric", "dtw_ap"},
                           {"value", format_double(r.ap)},
                           {"n_positive_pairs", std::to_string(r.n_positive_pairs)},
                           {"n_total_pairs", std::to_string(r.n_total_pairs)},
                           {"cross_speaker", r.cross_speaker ? "1" : "0"},
                           {"seed", std::to_string(seed)},
                           {"config_hash", hash_hex(hash)}});
    } else if (probe->parsed()) {
      KeyValues kv = {{"checkpoint", probe_ckpt},
                      {"features", probe_features},
                      {"emb", probe_emb},
                      {"raw", probe_raw ? "1" : "0"},
                      {"train_fraction", format_double(probe_train_fraction)},
                      {"seed", std::to_string(seed)}};
      const std::uint64_t hash = config_hash("probe-speaker", kv);
      print_provenance("probe-speaker", seed, hash);
      const EmbeddingSet set = resolve_embeddings(probe_emb, probe_ckpt,
                                                  probe_features, probe_raw, threads);
      const ProbeResult r = speaker_probe(set, probe_train_fraction, seed);
      std::cout << "accuracy=" << format_double(r.accuracy)
                << " n_train=" << r.n_train << " n_test=" << r.n_test
                << " n_speakers=" << r.n_speakers << "\n";
      if (!probe_out.empty())
        write_result_file(probe_out,
                          {{"metric", "speaker_probe_accuracy"},
                           {"value", format_double(r.accuracy)},
                           {"n_train", std::to_string(r.n_train)},
                           {"n_test", std::to_string(r.n_test)},
                           {"n_speakers", std::to_string(r.n_speakers)},
                           {"seed", std::to_string(seed)},
                           {"config_hash", hash_hex(hash)}});
    } else if (export_cmd->parsed()) {
      KeyValues kv = {{"checkpoint", export_ckpt},
                      {"features", export_features},
                      {"emb", export_emb},
                      {"out", export_out},
                      {"seed", std::to_string(seed)}};
      print_provenance("export", seed, config_hash("export", kv));
      const EmbeddingSet set = resolve_embeddings(export_emb, export_ckpt,
                                                  export_features, false, threads);
      export_embeddings(set, export_out);
      std::cout << "rows=" << set.size() << "\nwrote " << export_out << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace awe::cli
