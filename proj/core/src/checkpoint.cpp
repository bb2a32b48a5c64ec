#include "awe/checkpoint.hpp"

#include <cstring>

#include "binary_io.hpp"

namespace awe {

namespace {
constexpr char kMagic[4] = {'A', 'W', 'E', 'C'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

const std::string& Provenance::get(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end()) throw Error("provenance key '" + key + "' missing");
  return it->second;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const Parameters& p = checkpoint.params;
  auto os = detail::open_out(path);
  detail::write_bytes(os, kMagic, 4);
  detail::write_pod<std::uint32_t>(os, kFormatVersion);

  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.config.feature_dim));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.config.hidden_dim));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.config.n_layers));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.config.embedding_dim));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.config.cell));
  detail::write_pod<std::uint8_t>(os, p.config.with_decoder ? 1 : 0);
  detail::write_pod<std::uint64_t>(os, p.config.seed);

  detail::write_pod<std::uint32_t>(os,
      static_cast<std::uint32_t>(checkpoint.provenance.fields.size()));
  for (const auto& [k, v] : checkpoint.provenance.fields) {
    detail::write_string(os, k);
    detail::write_string(os, v);
  }

  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensors.size()));
  for (const auto& [name, tensor] : p.tensors) {
    detail::write_string(os, name);
    detail::write_pod<std::uint8_t>(os, tensor.trainable ? 1 : 0);
    const bool is_vector = tensor.value.cols() == 1;
    detail::write_pod<std::uint32_t>(os, is_vector ? 1 : 2);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensor.value.rows()));
    if (!is_vector)
      detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensor.value.cols()));
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
        tensor.value;
    detail::write_floats(os, rm.data(), static_cast<std::size_t>(rm.size()));
  }
  os.flush();
  if (!os) throw Error("I/O failure writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  auto is = detail::open_in(path);
  char magic[4];
  detail::read_bytes(is, magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw Error("'" + path + "' is not a checkpoint file");
  const auto version = detail::read_pod<std::uint32_t>(is, "checkpoint version");
  if (version != kFormatVersion)
    throw Error("unsupported checkpoint format_version " + std::to_string(version) +
                " (expected " + std::to_string(kFormatVersion) + ")");

  Checkpoint out;
  ModelConfig& cfg = out.params.config;
  cfg.feature_dim = static_cast<int>(detail::read_pod<std::uint32_t>(is, "feature_dim"));
  cfg.hidden_dim = static_cast<int>(detail::read_pod<std::uint32_t>(is, "hidden_dim"));
  cfg.n_layers = static_cast<int>(detail::read_pod<std::uint32_t>(is, "n_layers"));
  cfg.embedding_dim = static_cast<int>(detail::read_pod<std::uint32_t>(is, "embedding_dim"));
  const auto cell = detail::read_pod<std::uint32_t>(is, "cell type");
  if (cell != static_cast<std::uint32_t>(CellType::gru))
    throw Error("unknown cell type in checkpoint");
  cfg.cell = CellType::gru;
  cfg.with_decoder = detail::read_pod<std::uint8_t>(is, "with_decoder") != 0;
  cfg.seed = detail::read_pod<std::uint64_t>(is, "seed");
  cfg.validate();

  const auto n_prov = detail::read_pod<std::uint32_t>(is, "provenance count");
  for (std::uint32_t i = 0; i < n_prov; ++i) {
    std::string k = detail::read_string(is, "provenance key");
    std::string v = detail::read_string(is, "provenance value");
    out.provenance.fields.emplace(std::move(k), std::move(v));
  }

  const auto n_tensors = detail::read_pod<std::uint32_t>(is, "tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = detail::read_string(is, "tensor name");
    Tensor<float> t;
    t.trainable = detail::read_pod<std::uint8_t>(is, "trainable flag") != 0;
    const auto rank = detail::read_pod<std::uint32_t>(is, "tensor rank");
    if (rank < 1 || rank > 2)
      throw Error("corrupt file: tensor '" + name + "' has rank " + std::to_string(rank));
    const auto rows = detail::read_pod<std::uint32_t>(is, "tensor rows");
    const std::uint32_t cols =
        (rank == 2) ? detail::read_pod<std::uint32_t>(is, "tensor cols") : 1;
    const auto expected = detail::tensor_shape(cfg, name);
    if (static_cast<int>(rows) != expected.first ||
        static_cast<int>(cols) != expected.second)
      throw Error("corrupt file: tensor '" + name + "' shape " +
                  std::to_string(rows) + "x" + std::to_string(cols) +
                  " does not match config");
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    detail::read_floats(is, rm.data(), static_cast<std::size_t>(rm.size()), "tensor data");
    t.value = rm;
    if (!t.value.allFinite())
      throw Error("corrupt file: non-finite values in tensor '" + name + "'");
    out.params.tensors.emplace(name, std::move(t));
  }

  // every tensor the config implies must be present
  for (const auto& name : detail::tensor_creation_order(cfg))
    if (!out.params.tensors.count(name))
      throw Error("corrupt file: tensor '" + name + "' missing");
  return out;
}

std::string to_string(PolicyKind kind) {
  return kind == PolicyKind::cae_policy ? "cae" : "full";
}

PolicyKind policy_from_string(const std::string& s) {
  if (s == "cae") return PolicyKind::cae_policy;
  if (s == "full") return PolicyKind::full_finetune;
  throw Error("unknown adaptation policy '" + s + "' (expected cae|full)");
}

Parameters apply_adaptation_policy(const Checkpoint& checkpoint,
                                   const AdaptationPolicy& policy) {
  Parameters params = checkpoint.params;
  if (policy.policy == PolicyKind::full_finetune) {
    for (auto& [name, t] : params.tensors) t.trainable = true;
    return params;
  }

  if (!params.has_decoder())
    throw Error("cae adaptation policy requires a checkpoint with a decoder");
  Rng rng(policy.reinit_seed);
  // keep creation order so re-initialization is reproducible
  for (const auto& name : detail::tensor_creation_order(params.config)) {
    auto& t = params.tensors.at(name);
    if (name.rfind("enc.", 0) == 0) {
      t.trainable = false;  // frozen multilingual encoder
    } else if (name.rfind("proj.", 0) == 0) {
      t.trainable = true;   // only the state-to-embedding map keeps training
    } else {
      t.value = detail::init_tensor<float>(params.config, name, rng);
      t.trainable = true;
    }
  }
  return params;
}

}  // namespace awe
