#include "awe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>

#include "awe/objectives.hpp"
#include "binary_io.hpp"

namespace awe {

namespace {

// Deterministic chunked parallel map: out[i] = fn(i). Results land in
// preallocated slots, so the thread count never changes the output.
template <typename Fn>
void parallel_for(std::size_t n, int n_threads, const Fn& fn) {
  if (n_threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(n_threads, n);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace

EmbeddingSet embed_all(const Parameters& params, const SegmentStore& store,
                       int n_threads) {
  if (!store.fully_labeled())
    throw Error("embed_all requires a labeled store (evaluation needs labels)");
  EmbeddingSet set;
  set.dim = params.config.embedding_dim;
  set.entries.resize(store.size());
  parallel_for(store.size(), n_threads, [&](std::size_t i) {
    const FeatureSegment& seg = store[i];
    EmbeddingEntry& e = set.entries[i];
    e.id = seg.id;
    e.word_label = seg.word_label;
    e.speaker_id = seg.speaker_id;
    e.embedding = encode(params, seg.frames);
  });
  return set;
}

EmbeddingSet mean_pooled_features(const SegmentStore& store) {
  if (!store.fully_labeled())
    throw Error("mean_pooled_features requires a labeled store");
  EmbeddingSet set;
  set.dim = store.feature_dim();
  set.entries.reserve(store.size());
  for (const auto& seg : store.segments()) {
    EmbeddingEntry e;
    e.id = seg.id;
    e.word_label = seg.word_label;
    e.speaker_id = seg.speaker_id;
    e.embedding = seg.frames.colwise().mean().transpose();
    set.entries.push_back(std::move(e));
  }
  return set;
}

namespace {

struct RankedPair {
  double dist;
  std::uint32_t i, j;  // entry indices with id_i < id_j lexicographically
  bool positive;
};

// Shared ranking + AP core. keep/positive rules are evaluated on the label
// metadata; dist_fn(i, j) supplies the distance for a kept pair.
template <typename DistFn>
APResult ranked_ap(const std::vector<const std::string*>& ids,
                   const std::vector<const std::string*>& words,
                   const std::vector<const std::string*>& speakers,
                   bool cross_speaker, int n_threads, const DistFn& dist_fn) {
  const std::size_t n = ids.size();
  if (n < 2) throw Error("average precision needs at least 2 segments");
  for (std::size_t i = 0; i < n; ++i)
    if (words[i]->empty())
      throw Error("average precision requires labeled segments");

  std::vector<RankedPair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same_word = *words[i] == *words[j];
      const bool same_speaker = *speakers[i] == *speakers[j];
      if (cross_speaker && same_word && same_speaker) continue;  // excluded outright
      RankedPair rp;
      rp.positive = same_word && (!cross_speaker || !same_speaker);
      const bool swap = *ids[j] < *ids[i];
      rp.i = static_cast<std::uint32_t>(swap ? j : i);
      rp.j = static_cast<std::uint32_t>(swap ? i : j);
      rp.dist = 0.0;
      pairs.push_back(rp);
    }
  }

  std::size_t n_positive = 0;
  for (const auto& rp : pairs) n_positive += rp.positive;
  if (n_positive == 0) throw Error("average precision: no positive pair exists");

  parallel_for(pairs.size(), n_threads,
               [&](std::size_t p) { pairs[p].dist = dist_fn(pairs[p].i, pairs[p].j); });

  std::sort(pairs.begin(), pairs.end(), [&](const RankedPair& a, const RankedPair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (*ids[a.i] != *ids[b.i]) return *ids[a.i] < *ids[b.i];
    return *ids[a.j] < *ids[b.j];
  });

  double ap_sum = 0.0;
  std::size_t positives_seen = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].positive) {
      ++positives_seen;
      ap_sum += static_cast<double>(positives_seen) / static_cast<double>(k + 1);
    }
  }

  APResult result;
  result.ap = ap_sum / static_cast<double>(n_positive);
  result.n_positive_pairs = n_positive;
  result.n_total_pairs = pairs.size();
  result.cross_speaker = cross_speaker;
  return result;
}

double cosine_distance_d(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu < kNormFloor || nv < kNormFloor) return 1.0;
  return 1.0 - u.dot(v) / (nu * nv);
}

}  // namespace

APResult same_different_ap(const EmbeddingSet& set, bool cross_speaker,
                           int n_threads) {
  std::vector<const std::string*> ids, words, speakers;
  ids.reserve(set.size());
  for (const auto& e : set.entries) {
    ids.push_back(&e.id);
    words.push_back(&e.word_label);
    speakers.push_back(&e.speaker_id);
  }
  std::vector<Eigen::VectorXd> emb(set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    emb[i] = set.entries[i].embedding.cast<double>();
  return ranked_ap(ids, words, speakers, cross_speaker, n_threads,
                   [&](std::uint32_t i, std::uint32_t j) {
                     return cosine_distance_d(emb[i], emb[j]);
                   });
}

double dtw_distance(const Eigen::MatrixXf& x, const Eigen::MatrixXf& y) {
  const Eigen::Index t1 = x.rows();
  const Eigen::Index t2 = y.rows();
  if (t1 < 1 || t2 < 1) throw Error("dtw_distance: empty sequence");
  if (x.cols() != y.cols()) throw Error("dtw_distance: frame widths differ");

  const Eigen::MatrixXd xd = x.cast<double>();
  const Eigen::MatrixXd yd = y.cast<double>();
  const Eigen::VectorXd xn = xd.rowwise().norm();
  const Eigen::VectorXd yn = yd.rowwise().norm();
  const auto cell_cost = [&](Eigen::Index i, Eigen::Index j) {
    if (xn(i) < kNormFloor || yn(j) < kNormFloor) return 1.0;
    return 1.0 - xd.row(i).dot(yd.row(j)) / (xn(i) * yn(j));
  };

  // two-row dynamic program over (accumulated cost, path length); ties in
  // cost prefer diagonal, then (i-1,j), then (i,j-1)
  std::vector<double> prev_cost(t2), cur_cost(t2);
  std::vector<int> prev_len(t2), cur_len(t2);
  for (Eigen::Index j = 0; j < t2; ++j) {
    prev_cost[j] = (j == 0 ? 0.0 : prev_cost[j - 1]) + cell_cost(0, j);
    prev_len[j] = static_cast<int>(j) + 1;
  }
  for (Eigen::Index i = 1; i < t1; ++i) {
    cur_cost[0] = prev_cost[0] + cell_cost(i, 0);
    cur_len[0] = prev_len[0] + 1;
    for (Eigen::Index j = 1; j < t2; ++j) {
      double best = prev_cost[j - 1];  // diagonal
      int len = prev_len[j - 1];
      if (prev_cost[j] < best) {
        best = prev_cost[j];
        len = prev_len[j];
      }
      if (cur_cost[j - 1] < best) {
        best = cur_cost[j - 1];
        len = cur_len[j - 1];
      }
      cur_cost[j] = best + cell_cost(i, j);
      cur_len[j] = len + 1;
    }
    std::swap(prev_cost, cur_cost);
    std::swap(prev_len, cur_len);
  }
  return prev_cost[t2 - 1] / static_cast<double>(prev_len[t2 - 1]);
}

APResult dtw_ap(const SegmentStore& store, bool cross_speaker, int n_threads) {
  std::vector<const std::string*> ids, words, speakers;
  ids.reserve(store.size());
  for (const auto& seg : store.segments()) {
    ids.push_back(&seg.id);
    words.push_back(&seg.word_label);
    speakers.push_back(&seg.speaker_id);
  }
  return ranked_ap(ids, words, speakers, cross_speaker, n_threads,
                   [&](std::uint32_t i, std::uint32_t j) {
                     return dtw_distance(store[i].frames, store[j].frames);
                   });
}

ProbeResult speaker_probe(const EmbeddingSet& set, double train_fraction,
                          std::uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw Error("speaker_probe: train_fraction must be in (0, 1)");

  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < set.size(); ++i)
    by_speaker[set.entries[i].speaker_id].push_back(i);
  const std::size_t n_classes = by_speaker.size();
  if (n_classes < 2) throw Error("speaker_probe: need at least 2 speakers");

  std::map<std::string, int> class_of;
  {
    int next = 0;
    for (const auto& [spk, members] : by_speaker) class_of[spk] = next++;
  }

  // speaker-stratified split; every speaker lands in train at least once
  std::vector<std::size_t> train_idx, test_idx;
  {
    std::size_t stream = 0;
    for (const auto& [spk, members] : by_speaker) {
      std::vector<std::size_t> order = members;
      Rng rng(derive_seed(seed, /*stream=*/stream++));
      rng.shuffle(order);
      const std::size_t n_tr = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::llround(train_fraction * static_cast<double>(order.size()))));
      for (std::size_t k = 0; k < order.size(); ++k)
        (k < n_tr ? train_idx : test_idx).push_back(order[k]);
    }
  }
  if (test_idx.empty()) throw Error("speaker_probe: test split is empty");
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  const int dim = set.dim;
  const auto n_train = static_cast<Eigen::Index>(train_idx.size());
  Eigen::MatrixXd features(n_train, dim);
  std::vector<int> targets(train_idx.size());
  for (Eigen::Index r = 0; r < n_train; ++r) {
    const auto& e = set.entries[train_idx[r]];
    features.row(r) = e.embedding.cast<double>().transpose();
    targets[r] = class_of.at(e.speaker_id);
  }

  // multinomial logistic regression, fixed budget full-batch gradient descent
  constexpr int kIterations = 500;
  constexpr double kLearningRate = 0.1;
  constexpr double kL2 = 1e-4;
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(static_cast<int>(n_classes), dim);
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(static_cast<int>(n_classes));

  Eigen::MatrixXd logits, probs;
  for (int it = 0; it < kIterations; ++it) {
    logits = features * weights.transpose();
    logits.rowwise() += bias.transpose();
    probs = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
    probs.array().colwise() /= probs.rowwise().sum().array();
    for (Eigen::Index r = 0; r < n_train; ++r) probs(r, targets[r]) -= 1.0;
    const double inv_n = 1.0 / static_cast<double>(n_train);
    Eigen::MatrixXd g_w = inv_n * probs.transpose() * features + kL2 * weights;
    Eigen::VectorXd g_b = inv_n * probs.colwise().sum().transpose();
    weights -= kLearningRate * g_w;
    bias -= kLearningRate * g_b;
  }

  std::size_t correct = 0;
  for (std::size_t idx : test_idx) {
    const auto& e = set.entries[idx];
    Eigen::VectorXd scores = weights * e.embedding.cast<double>() + bias;
    Eigen::Index best = 0;
    scores.maxCoeff(&best);
    correct += (static_cast<int>(best) == class_of.at(e.speaker_id));
  }

  ProbeResult result;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
  result.n_train = train_idx.size();
  result.n_test = test_idx.size();
  result.n_speakers = n_classes;
  return result;
}

void export_embeddings(const EmbeddingSet& set, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << "id\tword_label\tspeaker_id";
  for (int d = 0; d < set.dim; ++d) os << "\te" << d;
  os << '\n';
  char buf[64];
  for (const auto& e : set.entries) {
    os << e.id << '\t' << e.word_label << '\t' << e.speaker_id;
    for (int d = 0; d < set.dim; ++d) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(e.embedding(d)));
      os << '\t' << buf;
    }
    os << '\n';
  }
  os.flush();
  if (!os) throw Error("I/O failure writing '" + path + "'");
}

namespace {
constexpr char kEmbMagic[4] = {'A', 'W', 'E', 'E'};
constexpr std::uint32_t kEmbVersion = 1;
}  // namespace

void save_embeddings(const EmbeddingSet& set, const std::string& path) {
  auto os = detail::open_out(path);
  detail::write_bytes(os, kEmbMagic, 4);
  detail::write_pod<std::uint32_t>(os, kEmbVersion);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(set.dim));
  detail::write_pod<std::uint64_t>(os, set.size());
  for (const auto& e : set.entries) {
    detail::write_string(os, e.id);
    detail::write_string(os, e.word_label);
    detail::write_string(os, e.speaker_id);
    detail::write_floats(os, e.embedding.data(), static_cast<std::size_t>(e.embedding.size()));
  }
  os.flush();
  if (!os) throw Error("I/O failure writing '" + path + "'");
}

EmbeddingSet load_embeddings(const std::string& path) {
  auto is = detail::open_in(path);
  char magic[4];
  detail::read_bytes(is, magic, 4, "embedding magic");
  if (std::memcmp(magic, kEmbMagic, 4) != 0)
    throw Error("'" + path + "' is not an embedding file");
  const auto version = detail::read_pod<std::uint32_t>(is, "embedding version");
  if (version != kEmbVersion)
    throw Error("unsupported embedding file version " + std::to_string(version));
  EmbeddingSet set;
  set.dim = static_cast<int>(detail::read_pod<std::uint32_t>(is, "embedding dim"));
  const auto count = detail::read_pod<std::uint64_t>(is, "entry count");
  set.entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingEntry e;
    e.id = detail::read_string(is, "entry id");
    e.word_label = detail::read_string(is, "entry word_label");
    e.speaker_id = detail::read_string(is, "entry speaker_id");
    e.embedding.resize(set.dim);
    detail::read_floats(is, e.embedding.data(), static_cast<std::size_t>(set.dim),
                        "entry embedding");
    set.entries.push_back(std::move(e));
  }
  return set;
}

void write_result_file(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& fields) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& [k, v] : fields) os << k << '=' << v << '\n';
  os.flush();
  if (!os) throw Error("I/O failure writing '" + path + "'");
}

}  // namespace awe
