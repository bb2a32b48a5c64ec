#include "awe/segment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

namespace awe {

void SegmentStore::add(FeatureSegment seg) {
  if (seg.frames.rows() < 1) {
    throw Error("segment '" + seg.id + "': T must be >= 1");
  }
  if (seg.frames.cols() != feature_dim_) {
    throw Error("segment '" + seg.id + "': frame width " +
                std::to_string(seg.frames.cols()) +
                " does not match store feature_dim " +
                std::to_string(feature_dim_));
  }
  if (!seg.frames.allFinite()) {
    throw Error("segment '" + seg.id + "': non-finite frame value");
  }
  if (index_.count(seg.id)) {
    throw Error("duplicate segment id '" + seg.id + "'");
  }
  index_.emplace(seg.id, segments_.size());
  segments_.push_back(std::move(seg));
}

std::size_t SegmentStore::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("unknown segment id '" + id + "'");
  return it->second;
}

bool SegmentStore::fully_labeled() const {
  return std::all_of(segments_.begin(), segments_.end(),
                     [](const FeatureSegment& s) { return !s.word_label.empty(); });
}

static std::vector<std::string> distinct_in_order(
    const std::vector<FeatureSegment>& segs,
    const std::string FeatureSegment::*field) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : segs) {
    if (seen.insert(s.*field).second) out.push_back(s.*field);
  }
  return out;
}

std::vector<std::string> SegmentStore::speakers() const {
  return distinct_in_order(segments_, &FeatureSegment::speaker_id);
}

std::vector<std::string> SegmentStore::languages() const {
  return distinct_in_order(segments_, &FeatureSegment::language_id);
}

SegmentStore strip_labels(const SegmentStore& store) {
  SegmentStore out(store.feature_dim());
  for (const auto& seg : store.segments()) {
    FeatureSegment copy = seg;
    copy.word_label.clear();
    out.add(std::move(copy));
  }
  return out;
}

SegmentStore merge_stores(const std::vector<const SegmentStore*>& stores) {
  if (stores.empty()) throw Error("merge_stores: no stores given");
  SegmentStore out(stores.front()->feature_dim());
  for (const SegmentStore* s : stores) {
    if (s->feature_dim() != out.feature_dim()) {
      throw Error("merge_stores: mixed feature_dim (" +
                  std::to_string(s->feature_dim()) + " vs " +
                  std::to_string(out.feature_dim()) + ")");
    }
    for (const auto& seg : s->segments()) out.add(seg);
  }
  return out;
}

void SyntheticConfig::validate() const {
  if (n_word_types < 1 || n_speakers < 1 || instances_per_type_per_speaker < 1)
    throw Error("SyntheticConfig: counts must be >= 1");
  if (template_length_min < 1 || template_length_max < template_length_min)
    throw Error("SyntheticConfig: bad template length range");
  if (length_jitter < 0.0 || length_jitter >= 1.0)
    throw Error("SyntheticConfig: length_jitter must be in [0, 1)");
  if (noise_sigma < 0.0 || speaker_gain_sigma < 0.0 || speaker_offset_sigma < 0.0)
    throw Error("SyntheticConfig: sigmas must be >= 0");
  if (feature_dim < 1) throw Error("SyntheticConfig: feature_dim must be >= 1");
}

namespace {

// Smooth word template: random walk, two passes of a 3-point moving average,
// then per-dimension centering and global RMS normalization.
Eigen::MatrixXd make_template(Rng& rng, int length, int dim) {
  Eigen::MatrixXd walk(length, dim);
  for (int d = 0; d < dim; ++d) {
    double x = rng.normal();
    for (int t = 0; t < length; ++t) {
      x += rng.normal();
      walk(t, d) = x;
    }
  }
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::MatrixXd smooth = walk;
    for (int t = 0; t < length; ++t) {
      const int lo = std::max(0, t - 1);
      const int hi = std::min(length - 1, t + 1);
      smooth.row(t) =
          0.25 * walk.row(lo) + 0.5 * walk.row(t) + 0.25 * walk.row(hi);
    }
    walk = smooth;
  }
  // per-dimension standardization: word types then differ in trajectory
  // shape, not in stationary frame statistics
  walk.rowwise() -= walk.colwise().mean();
  for (int d = 0; d < dim; ++d) {
    const double sd =
        std::sqrt(walk.col(d).squaredNorm() / static_cast<double>(length));
    if (sd > 1e-9) walk.col(d) /= sd;
  }
  return walk;
}

// Monotonic linear resampling of rows to a new length; endpoints map to
// endpoints.
Eigen::MatrixXd resample_rows(const Eigen::MatrixXd& src, int new_len) {
  const int old_len = static_cast<int>(src.rows());
  Eigen::MatrixXd out(new_len, src.cols());
  for (int i = 0; i < new_len; ++i) {
    double pos = (new_len == 1)
                     ? 0.5 * (old_len - 1)
                     : static_cast<double>(i) * (old_len - 1) / (new_len - 1);
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(old_len - 1, lo + 1);
    const double w = pos - lo;
    out.row(i) = (1.0 - w) * src.row(lo) + w * src.row(hi);
  }
  return out;
}

}  // namespace

SegmentStore generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const int D = config.feature_dim;
  SegmentStore store(D);

  // Speaker transforms first: a speaker's affine map is shared across all of
  // that speaker's instances.
  std::vector<Eigen::VectorXd> gains(config.n_speakers);
  std::vector<Eigen::VectorXd> offsets(config.n_speakers);
  {
    Rng rng(derive_seed(config.seed, /*stream=*/1));
    for (int s = 0; s < config.n_speakers; ++s) {
      gains[s].resize(D);
      offsets[s].resize(D);
      for (int d = 0; d < D; ++d) {
        gains[s](d) = rng.normal(1.0, config.speaker_gain_sigma);
        offsets[s](d) = rng.normal(0.0, config.speaker_offset_sigma);
      }
    }
  }

  char id_buf[160];
  for (int w = 0; w < config.n_word_types; ++w) {
    Rng rng(derive_seed(config.seed, /*stream=*/2, w));
    const int tmpl_len = static_cast<int>(
        rng.uniform_int(config.template_length_min, config.template_length_max));
    const Eigen::MatrixXd tmpl = make_template(rng, tmpl_len, D);

    for (int s = 0; s < config.n_speakers; ++s) {
      for (int k = 0; k < config.instances_per_type_per_speaker; ++k) {
        Rng irng(derive_seed(config.seed, /*stream=*/3,
                             static_cast<std::uint64_t>(w) << 22 |
                                 static_cast<std::uint64_t>(s) << 11 | k));
        const double lo = tmpl_len * (1.0 - config.length_jitter);
        const double hi = tmpl_len * (1.0 + config.length_jitter);
        const int T = std::max(1, static_cast<int>(std::lround(irng.uniform(lo, hi))));

        Eigen::MatrixXd frames = resample_rows(tmpl, T);
        frames.array().rowwise() *= gains[s].transpose().array();
        frames.rowwise() += offsets[s].transpose();
        for (int t = 0; t < T; ++t)
          for (int d = 0; d < D; ++d)
            frames(t, d) += irng.normal(0.0, config.noise_sigma);

        FeatureSegment seg;
        std::snprintf(id_buf, sizeof(id_buf), "%s_w%03d_s%02d_i%02d",
                      config.language_id.c_str(), w, s, k);
        seg.id = id_buf;
        std::snprintf(id_buf, sizeof(id_buf), "%s_w%03d",
                      config.language_id.c_str(), w);
        seg.word_label = id_buf;
        std::snprintf(id_buf, sizeof(id_buf), "%s_s%02d",
                      config.language_id.c_str(), s);
        seg.speaker_id = id_buf;
        seg.language_id = config.language_id;
        seg.frames = frames.cast<float>();
        store.add(std::move(seg));
      }
    }
  }
  return store;
}

void SplitSpec::validate() const {
  const double fractions[3] = {train_fraction, dev_fraction, test_fraction};
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0 || f > 1.0) throw Error("SplitSpec: fractions must be in [0, 1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("SplitSpec: fractions must sum to 1");
}

namespace {

// Largest-remainder apportionment of n items to 3 bins.
std::array<std::size_t, 3> apportion(std::size_t n, const double (&frac)[3]) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double share = frac[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(share));
    rem[i] = share - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return counts;
}

}  // namespace

std::tuple<SegmentStore, SegmentStore, SegmentStore> split(
    const SegmentStore& store, const SplitSpec& spec) {
  spec.validate();
  const double frac[3] = {spec.train_fraction, spec.dev_fraction,
                          spec.test_fraction};
  std::vector<int> assignment(store.size(), 0);

  if (spec.speaker_disjoint) {
    std::vector<std::string> speakers = store.speakers();
    if (speakers.size() < 3)
      throw Error("split: speaker_disjoint requires at least 3 speakers");
    Rng rng(spec.seed);
    rng.shuffle(speakers);

    std::unordered_map<std::string, std::size_t> per_speaker;
    for (const auto& seg : store.segments()) ++per_speaker[seg.speaker_id];

    // Greedy: hand each speaker to the split with the largest remaining
    // deficit against its target segment count.
    double target[3], assigned[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i)
      target[i] = frac[i] * static_cast<double>(store.size());
    std::unordered_map<std::string, int> speaker_split;
    for (const auto& spk : speakers) {
      int best = 0;
      for (int i = 1; i < 3; ++i)
        if (target[i] - assigned[i] > target[best] - assigned[best]) best = i;
      speaker_split[spk] = best;
      assigned[best] += static_cast<double>(per_speaker[spk]);
    }
    for (std::size_t i = 0; i < store.size(); ++i)
      assignment[i] = speaker_split[store[i].speaker_id];
  } else {
    std::vector<std::size_t> order(store.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);
    const auto counts = apportion(store.size(), frac);
    std::size_t pos = 0;
    for (int bin = 0; bin < 3; ++bin)
      for (std::size_t k = 0; k < counts[bin]; ++k) assignment[order[pos++]] = bin;
  }

  SegmentStore train(store.feature_dim()), dev(store.feature_dim()),
      test(store.feature_dim());
  SegmentStore* out[3] = {&train, &dev, &test};
  for (std::size_t i = 0; i < store.size(); ++i) out[assignment[i]]->add(store[i]);
  return {std::move(train), std::move(dev), std::move(test)};
}

}  // namespace awe
