#ifndef AWE_SEGMENT_HPP
#define AWE_SEGMENT_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "awe/common.hpp"

namespace awe {

// One variable-length word segment. frames is T x D, one feature vector per
// row; word_label empty means unlabeled.
struct FeatureSegment {
  std::string id;
  Eigen::MatrixXf frames;
  std::string word_label;
  std::string speaker_id;
  std::string language_id;

  Eigen::Index length() const { return frames.rows(); }
};

// Ordered collection of segments with a fixed feature width and id lookup.
// Immutable once built; safe to share read-only across threads.
class SegmentStore {
 public:
  explicit SegmentStore(int feature_dim) : feature_dim_(feature_dim) {
    if (feature_dim < 1) throw Error("SegmentStore: feature_dim must be >= 1");
  }

  int feature_dim() const { return feature_dim_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }

  const FeatureSegment& operator[](std::size_t i) const { return segments_[i]; }
  const std::vector<FeatureSegment>& segments() const { return segments_; }

  void add(FeatureSegment seg);

  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  std::size_t index_of(const std::string& id) const;
  const FeatureSegment& by_id(const std::string& id) const {
    return segments_[index_of(id)];
  }

  // True when every segment carries a word label.
  bool fully_labeled() const;

  // Distinct speaker ids in first-appearance order.
  std::vector<std::string> speakers() const;
  // Distinct language ids in first-appearance order.
  std::vector<std::string> languages() const;

 private:
  int feature_dim_;
  std::vector<FeatureSegment> segments_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Copy of a store with all word labels removed. Training paths that must not
// see labels operate on the stripped copy, so a poisoned label can never
// influence them.
SegmentStore strip_labels(const SegmentStore& store);

// Merge stores into one; ids must stay unique and widths must agree.
SegmentStore merge_stores(const std::vector<const SegmentStore*>& stores);

struct SyntheticConfig {
  int n_word_types = 10;
  int n_speakers = 4;
  int instances_per_type_per_speaker = 2;
  int template_length_min = 20;
  int template_length_max = 50;
  double length_jitter = 0.2;     // instance length in [T(1-j), T(1+j)]
  double noise_sigma = 0.1;       // i.i.d. frame noise
  double speaker_gain_sigma = 0.1;    // per-dimension gain ~ N(1, s^2)
  double speaker_offset_sigma = 0.1;  // per-dimension offset ~ N(0, s^2)
  int feature_dim = 13;
  std::string language_id = "syn";
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic synthetic word-segment generator. Each word type gets one
// smooth template (Gaussian random walk, moving-average smoothed, centered,
// RMS-normalized); each instance is a monotonic linear resampling of the
// template to a jittered length, passed through a per-speaker per-dimension
// affine transform, plus i.i.d. Gaussian frame noise.
SegmentStore generate_synthetic(const SyntheticConfig& config);

struct SplitSpec {
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  bool speaker_disjoint = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Partition into (train, dev, test). With speaker_disjoint, whole speakers
// are assigned to splits (requires >= 3 speakers); fractions are then matched
// as closely as the speaker granularity allows.
std::tuple<SegmentStore, SegmentStore, SegmentStore> split(
    const SegmentStore& store, const SplitSpec& spec);

}  // namespace awe

#endif  // AWE_SEGMENT_HPP
