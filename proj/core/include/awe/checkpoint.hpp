#ifndef AWE_CHECKPOINT_HPP
#define AWE_CHECKPOINT_HPP

#include <map>
#include <string>

#include "awe/model.hpp"

namespace awe {

// Free-form key-value training provenance. Conventional keys: objective,
// stage (monolingual | multilingual | adapted), source_languages,
// target_language, pair_provenance, seed.
struct Provenance {
  std::map<std::string, std::string> fields;

  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const { return fields.count(key) > 0; }
};

struct Checkpoint {
  Parameters params;
  Provenance provenance;
};

// Checkpoint file:
//   magic "AWEC" | u32 format_version=1
//   | ModelConfig {u32 feature_dim, hidden_dim, n_layers, embedding_dim,
//     cell, u8 with_decoder, u64 seed}
//   | u32 n_provenance | n x {key, value}
//   | u32 n_tensors | n x {name, u8 trainable, u32 rank, u32 dims[rank],
//     float32 data row-major}
// Parameter values round-trip bit-exactly.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

enum class PolicyKind { cae_policy, full_finetune };

std::string to_string(PolicyKind kind);
PolicyKind policy_from_string(const std::string& s);

struct AdaptationPolicy {
  PolicyKind policy = PolicyKind::full_finetune;
  std::uint64_t reinit_seed = 0;
};

// full_finetune: values unchanged, everything trainable.
// cae_policy: encoder recurrent tensors frozen (values kept), projection
// trainable, decoder stack and output head freshly re-initialized from
// reinit_seed and trainable. Requires a checkpoint with a decoder.
Parameters apply_adaptation_policy(const Checkpoint& checkpoint,
                                   const AdaptationPolicy& policy);

}  // namespace awe

#endif  // AWE_CHECKPOINT_HPP
