#ifndef AWE_EVAL_HPP
#define AWE_EVAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "awe/model.hpp"
#include "awe/segment.hpp"

namespace awe {

struct EmbeddingEntry {
  std::string id;
  Eigen::VectorXf embedding;
  std::string word_label;
  std::string speaker_id;
};

// Fixed-width embeddings with the labels evaluation needs. dim is kept
// explicitly so empty sets stay well-formed.
struct EmbeddingSet {
  int dim = 0;
  std::vector<EmbeddingEntry> entries;

  std::size_t size() const { return entries.size(); }
};

// One embedding per segment via the encoder; labels are carried through for
// evaluation only. Segments may be embedded in parallel.
EmbeddingSet embed_all(const Parameters& params, const SegmentStore& store,
                       int n_threads = 1);

// Mean of each segment's frames as a D-dimensional pseudo-embedding; the
// no-model baseline for the speaker probe.
EmbeddingSet mean_pooled_features(const SegmentStore& store);

struct APResult {
  double ap = 0.0;
  std::size_t n_positive_pairs = 0;
  std::size_t n_total_pairs = 0;
  bool cross_speaker = false;
};

// Same-different word discrimination average precision over all unordered
// segment pairs, ranked by ascending cosine distance with a deterministic
// tie-break (distance, then the lexicographic id pair). AP is the mean of
// precision-at-k over the ranks k holding positives.
//
// With cross_speaker, a pair counts as positive only when the word labels
// match across different speakers; same-word same-speaker pairs are removed
// from the ranking entirely (they are neither positives nor negatives).
APResult same_different_ap(const EmbeddingSet& set, bool cross_speaker,
                           int n_threads = 1);

// Dynamic time warping distance between two frame sequences: per-cell cost
// is the cosine distance between frames, steps are (i-1,j), (i,j-1),
// (i-1,j-1), anchored at both ends; the accumulated cost of the optimal
// path divided by the number of cells on that path.
double dtw_distance(const Eigen::MatrixXf& x, const Eigen::MatrixXf& y);

// The same ranking task with DTW distances on raw frames in place of
// embedding distances.
APResult dtw_ap(const SegmentStore& store, bool cross_speaker, int n_threads = 1);

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_speakers = 0;
};

// Linear speaker-identity probe: multinomial logistic regression (500
// full-batch gradient steps, lr 0.1, L2 1e-4) on a speaker-stratified
// train/test split. Lower accuracy means more speaker-invariant embeddings.
ProbeResult speaker_probe(const EmbeddingSet& set, double train_fraction,
                          std::uint64_t seed);

// Tab-separated text table: header row, then one line per entry with id,
// word_label, speaker_id and the embedding values at 9 significant digits.
void export_embeddings(const EmbeddingSet& set, const std::string& path);

// Binary embedding container used by the CLI:
//   magic "AWEE" | u32 version=1 | u32 dim | u64 count
//   | count x {id, word_label, speaker_id, dim float32}
void save_embeddings(const EmbeddingSet& set, const std::string& path);
EmbeddingSet load_embeddings(const std::string& path);

// key=value result file, one entry per line
void write_result_file(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& fields);

}  // namespace awe

#endif  // AWE_EVAL_HPP
