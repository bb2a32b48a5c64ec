#include "awe/model.hpp"

namespace awe::detail {

std::vector<std::string> tensor_creation_order(const ModelConfig& config) {
  std::vector<std::string> names;
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string p = "enc." + std::to_string(l) + ".";
    names.push_back(p + "w_ih");
    names.push_back(p + "w_hh");
    names.push_back(p + "b");
  }
  names.push_back("proj.w");
  names.push_back("proj.b");
  if (config.with_decoder) {
    for (int l = 0; l < config.n_layers; ++l) {
      const std::string p = "dec." + std::to_string(l) + ".";
      names.push_back(p + "w_ih");
      names.push_back(p + "w_hh");
      names.push_back(p + "b");
    }
    names.push_back("out.w");
    names.push_back("out.b");
  }
  return names;
}

namespace {

// layer input width for enc/dec stacks
int layer_input_dim(const ModelConfig& config, bool decoder, int layer) {
  if (layer > 0) return config.hidden_dim;
  return decoder ? config.embedding_dim : config.feature_dim;
}

struct ParsedName {
  enum Kind { enc, dec, proj_w, proj_b, out_w, out_b } kind;
  int layer = -1;
  std::string leaf;  // w_ih | w_hh | b
};

ParsedName parse_name(const std::string& name) {
  ParsedName p;
  if (name == "proj.w") { p.kind = ParsedName::proj_w; return p; }
  if (name == "proj.b") { p.kind = ParsedName::proj_b; return p; }
  if (name == "out.w") { p.kind = ParsedName::out_w; return p; }
  if (name == "out.b") { p.kind = ParsedName::out_b; return p; }
  const auto first = name.find('.');
  const auto last = name.rfind('.');
  if (first == std::string::npos || last == first)
    throw Error("unknown tensor name '" + name + "'");
  const std::string stack = name.substr(0, first);
  p.layer = std::stoi(name.substr(first + 1, last - first - 1));
  p.leaf = name.substr(last + 1);
  if (stack == "enc") p.kind = ParsedName::enc;
  else if (stack == "dec") p.kind = ParsedName::dec;
  else throw Error("unknown tensor name '" + name + "'");
  return p;
}

}  // namespace

std::pair<int, int> tensor_shape(const ModelConfig& config, const std::string& name) {
  const int H = config.hidden_dim;
  const ParsedName p = parse_name(name);
  switch (p.kind) {
    case ParsedName::proj_w: return {config.embedding_dim, H};
    case ParsedName::proj_b: return {config.embedding_dim, 1};
    case ParsedName::out_w: return {config.feature_dim, H};
    case ParsedName::out_b: return {config.feature_dim, 1};
    case ParsedName::enc:
    case ParsedName::dec: {
      const bool decoder = (p.kind == ParsedName::dec);
      if (p.leaf == "w_ih") return {3 * H, layer_input_dim(config, decoder, p.layer)};
      if (p.leaf == "w_hh") return {3 * H, H};
      if (p.leaf == "b") return {3 * H, 1};
      throw Error("unknown tensor name '" + name + "'");
    }
  }
  throw Error("unknown tensor name '" + name + "'");
}

int tensor_fan_in(const ModelConfig& config, const std::string& name) {
  const ParsedName p = parse_name(name);
  switch (p.kind) {
    case ParsedName::proj_w: return config.hidden_dim;
    case ParsedName::out_w: return config.hidden_dim;
    case ParsedName::proj_b:
    case ParsedName::out_b: return 0;
    case ParsedName::enc:
    case ParsedName::dec: {
      if (p.leaf == "b") return 0;
      const bool decoder = (p.kind == ParsedName::dec);
      if (p.leaf == "w_ih") return layer_input_dim(config, decoder, p.layer);
      return config.hidden_dim;  // w_hh
    }
  }
  return 0;
}

}  // namespace awe::detail
