#include "awe/objectives.hpp"

#include <map>

namespace awe {

TypeGroups groups_from_labels(const SegmentStore& store) {
  if (!store.fully_labeled())
    throw Error("type grouping by label requires a fully labeled store");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < store.size(); ++i)
    by_label[store[i].word_label].push_back(i);
  TypeGroups out;
  out.groups.reserve(by_label.size());
  for (auto& [label, members] : by_label) out.groups.push_back(std::move(members));
  return out;
}

TypeGroups groups_from_pairs(const SegmentStore& store, const PairList& pairs) {
  const PairComponents comps = pair_components(store, pairs);
  TypeGroups out;
  out.groups.resize(comps.n_components);
  for (std::size_t i = 0; i < comps.segment_indices.size(); ++i)
    out.groups[comps.component_of[i]].push_back(comps.segment_indices[i]);
  return out;
}

std::vector<PKBatch> build_pk_batches(const TypeGroups& groups, int p, int k,
                                      std::uint64_t seed) {
  if (p < 2) throw Error("build_pk_batches: P must be >= 2");
  if (k < 2) throw Error("build_pk_batches: K must be >= 2");

  std::vector<std::size_t> eligible;
  for (std::size_t g = 0; g < groups.groups.size(); ++g)
    if (groups.groups[g].size() >= static_cast<std::size_t>(k)) eligible.push_back(g);
  if (eligible.size() < 2)
    throw Error("build_pk_batches: need >= 2 types with >= " + std::to_string(k) +
                " instances, have " + std::to_string(eligible.size()));

  Rng rng(seed);
  rng.shuffle(eligible);

  std::vector<PKBatch> batches;
  for (std::size_t start = 0; start < eligible.size(); start += p) {
    const std::size_t count = std::min<std::size_t>(p, eligible.size() - start);
    if (count < 2) break;  // a single-type trailing chunk has no negatives
    PKBatch batch;
    for (std::size_t t = 0; t < count; ++t) {
      std::vector<std::size_t> members = groups.groups[eligible[start + t]];
      rng.shuffle(members);
      for (int i = 0; i < k; ++i) {
        batch.segment_indices.push_back(members[i]);
        batch.type_of.push_back(static_cast<int>(t));
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<PKBatch> build_pk_batches(const SegmentStore& store, int p, int k,
                                      std::uint64_t seed) {
  return build_pk_batches(groups_from_labels(store), p, k, seed);
}

std::vector<PKBatch> build_pk_batches(const SegmentStore& store,
                                      const PairList& pairs, int p, int k,
                                      std::uint64_t seed) {
  return build_pk_batches(groups_from_pairs(store, pairs), p, k, seed);
}

std::vector<ContrastiveBatch> build_contrastive_batches(const SegmentStore& store,
                                                        const PairList& pairs,
                                                        int n, std::uint64_t seed) {
  if (n < 2) throw Error("build_contrastive_batches: N must be >= 2");
  pairs.validate_against(store);
  if (pairs.size() < static_cast<std::size_t>(n))
    throw Error("build_contrastive_batches: fewer than N pairs");

  // claimed type of a pair = its graph component (either endpoint)
  const PairComponents comps = pair_components(store, pairs);
  std::vector<int> comp_by_segment(store.size(), -1);
  for (std::size_t i = 0; i < comps.segment_indices.size(); ++i)
    comp_by_segment[comps.segment_indices[i]] = comps.component_of[i];

  struct Entry {
    std::size_t a, b;
    int comp;
  };
  std::vector<Entry> entries;
  entries.reserve(pairs.size());
  for (const auto& [ida, idb] : pairs.pairs) {
    const std::size_t a = store.index_of(ida);
    const std::size_t b = store.index_of(idb);
    entries.push_back({a, b, comp_by_segment[a]});
  }
  {
    std::vector<char> seen(comps.n_components, 0);
    std::size_t distinct = 0;
    for (const auto& e : entries)
      if (!seen[e.comp]) { seen[e.comp] = 1; ++distinct; }
    if (distinct < static_cast<std::size_t>(n))
      throw Error("build_contrastive_batches: fewer than N distinct claimed types");
  }

  Rng rng(seed);
  rng.shuffle(entries);

  std::vector<ContrastiveBatch> batches;
  std::vector<Entry> remaining = std::move(entries);
  while (remaining.size() >= static_cast<std::size_t>(n)) {
    ContrastiveBatch batch;
    std::vector<char> used(comps.n_components, 0);
    std::vector<Entry> leftover;
    leftover.reserve(remaining.size());
    for (const auto& e : remaining) {
      if (batch.pair_indices.size() < static_cast<std::size_t>(n) && !used[e.comp]) {
        used[e.comp] = 1;
        batch.pair_indices.emplace_back(e.a, e.b);
      } else {
        leftover.push_back(e);
      }
    }
    if (batch.pair_indices.size() < static_cast<std::size_t>(n)) break;
    batches.push_back(std::move(batch));
    remaining = std::move(leftover);
  }
  return batches;
}

}  // namespace awe
