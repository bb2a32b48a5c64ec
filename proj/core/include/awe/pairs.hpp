#ifndef AWE_PAIRS_HPP
#define AWE_PAIRS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "awe/segment.hpp"

namespace awe {

enum class PairProvenance { ground_truth, simulated_utd, external_file };

std::string to_string(PairProvenance p);

// Positive same-type claims over segment ids. The claims may be noisy;
// claimed_precision records the expected fraction of correct ones.
struct PairList {
  std::vector<std::pair<std::string, std::string>> pairs;
  PairProvenance provenance = PairProvenance::external_file;
  std::optional<double> claimed_precision;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  // Every id must resolve in the store and no pair may be a self-pair.
  void validate_against(const SegmentStore& store) const;
};

// Uniformly sampled same-label pairs (without replacement, up to max_pairs).
// Requires a fully labeled store with at least one valid pair.
PairList ground_truth_pairs(const SegmentStore& store, std::size_t max_pairs,
                            std::uint64_t seed);

// Count of all same-label pairs in a labeled store.
std::size_t count_ground_truth_pairs(const SegmentStore& store);

// Noisy pair miner standing in for a term discovery system: exactly
// round(precision * n_pairs) same-label pairs and the rest different-label,
// shuffled. Consumers get ids only; the labels used here never travel with
// the result.
PairList simulate_utd_pairs(const SegmentStore& store, std::size_t n_pairs,
                            double precision, std::uint64_t seed);

// Pair files are text, one "id_a<TAB>id_b" per line.
void save_pairs(const PairList& pairs, const std::string& path);
PairList load_pairs(const std::string& path);

// Connected components of the pair graph: segments transitively linked by
// pairs share a pseudo-type. Returns one entry per pair-covered segment
// (store index -> component id); component ids are dense, numbered by first
// appearance in store order.
struct PairComponents {
  std::vector<std::size_t> segment_indices;  // store indices, ascending
  std::vector<int> component_of;             // parallel to segment_indices
  int n_components = 0;
};

PairComponents pair_components(const SegmentStore& store, const PairList& pairs);

}  // namespace awe

#endif  // AWE_PAIRS_HPP
