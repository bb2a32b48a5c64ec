#include "awe/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace awe {

std::string to_string(PairProvenance p) {
  switch (p) {
    case PairProvenance::ground_truth: return "ground_truth";
    case PairProvenance::simulated_utd: return "simulated_utd";
    case PairProvenance::external_file: return "external_file";
  }
  return "unknown";
}

void PairList::validate_against(const SegmentStore& store) const {
  for (const auto& [a, b] : pairs) {
    if (a == b) throw Error("pair list contains self-pair '" + a + "'");
    if (!store.contains(a)) throw Error("pair id '" + a + "' not in store");
    if (!store.contains(b)) throw Error("pair id '" + b + "' not in store");
  }
}

namespace {

// label -> store indices, in deterministic label order
std::map<std::string, std::vector<std::size_t>> group_by_label(
    const SegmentStore& store) {
  if (!store.fully_labeled())
    throw Error("pair mining requires a fully labeled store");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < store.size(); ++i)
    groups[store[i].word_label].push_back(i);
  return groups;
}

std::vector<std::pair<std::size_t, std::size_t>> enumerate_same_label_pairs(
    const std::map<std::string, std::vector<std::size_t>>& groups) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [label, members] : groups)
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        out.emplace_back(members[i], members[j]);
  return out;
}

}  // namespace

std::size_t count_ground_truth_pairs(const SegmentStore& store) {
  std::size_t n = 0;
  for (const auto& [label, members] : group_by_label(store))
    n += members.size() * (members.size() - 1) / 2;
  return n;
}

PairList ground_truth_pairs(const SegmentStore& store, std::size_t max_pairs,
                            std::uint64_t seed) {
  auto all = enumerate_same_label_pairs(group_by_label(store));
  if (all.empty()) throw Error("ground_truth_pairs: no same-label pair exists");
  Rng rng(seed);
  rng.shuffle(all);
  if (all.size() > max_pairs) all.resize(max_pairs);

  PairList out;
  out.provenance = PairProvenance::ground_truth;
  out.claimed_precision = 1.0;
  out.pairs.reserve(all.size());
  for (const auto& [i, j] : all)
    out.pairs.emplace_back(store[i].id, store[j].id);
  return out;
}

PairList simulate_utd_pairs(const SegmentStore& store, std::size_t n_pairs,
                            double precision, std::uint64_t seed) {
  if (precision < 0.0 || precision > 1.0)
    throw Error("simulate_utd_pairs: precision must be in [0, 1]");
  const auto groups = group_by_label(store);
  const std::size_t n_same =
      static_cast<std::size_t>(std::llround(precision * static_cast<double>(n_pairs)));
  const std::size_t n_diff = n_pairs - n_same;

  auto same = enumerate_same_label_pairs(groups);
  if (same.size() < n_same)
    throw Error("simulate_utd_pairs: only " + std::to_string(same.size()) +
                " same-type pairs available, need " + std::to_string(n_same));

  const std::size_t n = store.size();
  const std::size_t total_pairs = n * (n - 1) / 2;
  const std::size_t diff_available = total_pairs - same.size();
  if (diff_available < n_diff)
    throw Error("simulate_utd_pairs: only " + std::to_string(diff_available) +
                " different-type pairs available, need " + std::to_string(n_diff));

  Rng rng(seed);
  rng.shuffle(same);
  same.resize(n_same);

  std::vector<std::pair<std::size_t, std::size_t>> diff;
  diff.reserve(n_diff);
  if (n_diff > diff_available / 2) {
    // dense request: enumerate instead of rejection-sampling
    std::vector<std::pair<std::size_t, std::size_t>> all_diff;
    all_diff.reserve(diff_available);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (store[i].word_label != store[j].word_label) all_diff.emplace_back(i, j);
    rng.shuffle(all_diff);
    all_diff.resize(n_diff);
    diff = std::move(all_diff);
  } else {
    std::unordered_set<std::uint64_t> taken;
    while (diff.size() < n_diff) {
      std::size_t i = rng.uniform_index(n);
      std::size_t j = rng.uniform_index(n);
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      if (store[i].word_label == store[j].word_label) continue;
      const std::uint64_t key = (static_cast<std::uint64_t>(i) << 32) | j;
      if (!taken.insert(key).second) continue;
      diff.emplace_back(i, j);
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> combined;
  combined.reserve(n_pairs);
  combined.insert(combined.end(), same.begin(), same.end());
  combined.insert(combined.end(), diff.begin(), diff.end());
  rng.shuffle(combined);

  PairList out;
  out.provenance = PairProvenance::simulated_utd;
  out.claimed_precision = precision;
  out.pairs.reserve(combined.size());
  for (const auto& [i, j] : combined)
    out.pairs.emplace_back(store[i].id, store[j].id);
  return out;
}

void save_pairs(const PairList& pairs, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& [a, b] : pairs.pairs) os << a << '\t' << b << '\n';
  os.flush();
  if (!os) throw Error("I/O failure writing '" + path + "'");
}

PairList load_pairs(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "' for reading");
  PairList out;
  out.provenance = PairProvenance::external_file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> tokens;
    std::string tok;
    std::istringstream ls(line);
    while (std::getline(ls, tok, '\t')) tokens.push_back(tok);
    if (tokens.size() != 2 || tokens[0].empty() || tokens[1].empty())
      throw Error("'" + path + "' line " + std::to_string(line_no) +
                  ": expected 'id_a<TAB>id_b'");
    out.pairs.emplace_back(tokens[0], tokens[1]);
  }
  return out;
}

PairComponents pair_components(const SegmentStore& store, const PairList& pairs) {
  pairs.validate_against(store);

  // union-find over store indices restricted to pair-covered segments
  std::vector<std::size_t> parent(store.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<char> covered(store.size(), 0);

  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };

  for (const auto& [a, b] : pairs.pairs) {
    const std::size_t ia = store.index_of(a);
    const std::size_t ib = store.index_of(b);
    covered[ia] = covered[ib] = 1;
    const std::size_t ra = find(ia), rb = find(ib);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }

  PairComponents out;
  std::vector<int> label_of_root(store.size(), -1);
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!covered[i]) continue;
    const std::size_t root = find(i);
    if (label_of_root[root] < 0) label_of_root[root] = out.n_components++;
    out.segment_indices.push_back(i);
    out.component_of.push_back(label_of_root[root]);
  }
  return out;
}

}  // namespace awe
