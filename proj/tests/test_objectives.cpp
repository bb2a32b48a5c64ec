#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "awe/objectives.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace awe;
using namespace awe::test;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.feature_dim = 3;
  cfg.hidden_dim = 6;
  cfg.n_layers = 2;
  cfg.embedding_dim = 4;
  cfg.seed = seed;
  return cfg;
}

std::vector<VecX<double>> to_vecs(const std::vector<std::vector<double>>& raw) {
  std::vector<VecX<double>> out;
  for (const auto& v : raw) {
    VecX<double> x(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) x(i) = v[i];
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace

TEST_CASE("cosine space basics and the zero-vector convention") {
  VecX<double> u(2), v(2), zero = VecX<double>::Zero(2);
  u << 1.0, 0.0;
  v << 0.0, 2.0;
  CHECK(cosine_similarity(u, u) == doctest::Approx(1.0));
  CHECK(cosine_similarity(u, v) == doctest::Approx(0.0));
  CHECK(cosine_distance(u, v) == doctest::Approx(1.0));
  CHECK(cosine_similarity(zero, u) == 0.0);
  CHECK(cosine_distance(zero, u) == 1.0);

  VecX<double> gu = VecX<double>::Zero(2), gv = VecX<double>::Zero(2);
  add_cosine_similarity_grad(zero, u, 1.0, gu, gv);
  CHECK(gu.isZero());
  CHECK(gv.isZero());
}

TEST_CASE("ae/cae losses: definitional identities") {
  const auto params = init_model<double>(tiny_config(5));
  Rng rng(17);
  const Eigen::MatrixXd x = random_matrix(rng, 4, 3);

  SUBCASE("cae with identical input/target reduces to ae exactly") {
    CHECK(cae_loss(params, x, x) == ae_loss(params, x));
  }

  SUBCASE("zero output head makes the loss the squared norm of the target") {
    auto p = params;
    p.value("out.w").setZero();
    p.value("out.b").setZero();
    const Eigen::MatrixXd target = random_matrix(rng, 5, 3);
    CHECK(cae_loss(p, x, target) == doctest::Approx(target.squaredNorm()));
    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(3, 3);
    CHECK(ae_loss(p, zeros) == 0.0);
  }

  SUBCASE("matches the scalar hand-rolled forward") {
    const Eigen::MatrixXd target = random_matrix(rng, 3, 3);
    CHECK(cae_loss(params, x, target) ==
          doctest::Approx(oracle_cae_loss(params, x, target)).epsilon(1e-12));
  }

  SUBCASE("decoder unrolls to the target's length") {
    const Eigen::MatrixXd t2 = random_matrix(rng, 2, 3);
    const Eigen::MatrixXd t7 = random_matrix(rng, 7, 3);
    CHECK(cae_loss(params, x, t2) != cae_loss(params, x, t7));
  }
}

TEST_CASE("triplet batch-hard: closed forms and oracle agreement") {
  const TripletHyper hyper{0.25};

  SUBCASE("all-identical embeddings give exactly the margin") {
    std::vector<VecX<double>> emb(4, VecX<double>::Ones(3));
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(triplet_loss_batch_hard(emb, labels, hyper) == doctest::Approx(0.25));
  }

  SUBCASE("well-separated clusters give zero") {
    // positives at distance 0, negatives orthogonal (distance 1 > margin)
    auto emb = to_vecs({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(triplet_loss_batch_hard(emb, labels, hyper) == 0.0);
  }

  SUBCASE("hand-placed 2D batch matches the brute-force scan") {
    auto emb = to_vecs({{1.0, 0.1}, {0.8, 0.4}, {-0.2, 1.0}, {0.3, 0.9}});
    const std::vector<int> labels{0, 0, 1, 1};
    const double got = triplet_loss_batch_hard(emb, labels, hyper);
    const double want = brute_force_triplet(emb, labels, 0.25);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("random batches match the brute-force scan") {
    Rng rng(31);
    for (int rep = 0; rep < 50; ++rep) {
      const int n_types = 2 + static_cast<int>(rng.uniform_index(3));
      std::vector<VecX<double>> emb;
      std::vector<int> labels;
      for (int t = 0; t < n_types; ++t)
        for (int k = 0; k < 2 + static_cast<int>(rng.uniform_index(2)); ++k) {
          emb.push_back(random_matrix(rng, 5, 1).col(0));
          labels.push_back(t);
        }
      const double got = triplet_loss_batch_hard(emb, labels, hyper);
      const double want = brute_force_triplet(emb, labels, hyper.margin);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }

  SUBCASE("precondition violations") {
    auto emb = to_vecs({{1, 0}, {0, 1}, {1, 1}});
    CHECK_THROWS_WITH_AS(
        triplet_loss_batch_hard(emb, std::vector<int>{0, 0, 0}, hyper),
        doctest::Contains("2 distinct labels"), Error);
    CHECK_THROWS_WITH_AS(
        triplet_loss_batch_hard(emb, std::vector<int>{0, 1, 1}, hyper),
        doctest::Contains("single instance"), Error);
  }
}

TEST_CASE("contrastive loss: closed forms and explicit evaluation") {
  SUBCASE("all-equal embeddings give N * ln(2N-1)") {
    for (int n : {2, 3, 5}) {
      std::vector<VecX<double>> emb(2 * n, VecX<double>::Ones(4));
      const ContrastiveHyper hyper{0.1, n, false};
      CHECK(contrastive_loss(emb, hyper) ==
            doctest::Approx(n * std::log(2.0 * n - 1.0)).epsilon(1e-9));
    }
    // the N=2 value to 7 decimals
    std::vector<VecX<double>> emb(4, VecX<double>::Ones(2));
    CHECK(contrastive_loss(emb, ContrastiveHyper{0.1, 2, false}) ==
          doctest::Approx(2.1972246).epsilon(1e-6));
  }

  SUBCASE("aligned positives, orthogonal negatives, small tau: terms -> 0") {
    auto emb = to_vecs({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 1, 0}});
    const double loss = contrastive_loss(emb, ContrastiveHyper{0.02, 2, false});
    CHECK(loss < 1e-10);
  }

  SUBCASE("N=2 equals the explicit 4-term softmax arithmetic") {
    auto emb = to_vecs({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
    const double tau = 0.1;
    auto term = [&](double s_ap, double s_n1, double s_n2) {
      const double denom =
          std::exp(s_ap / tau) + std::exp(s_n1 / tau) + std::exp(s_n2 / tau);
      return -std::log(std::exp(s_ap / tau) / denom);
    };
    // each anchor: positive at sim 1, two negatives at sim 0
    const double expected = term(1.0, 0.0, 0.0) + term(1.0, 0.0, 0.0);
    CHECK(contrastive_loss(emb, ContrastiveHyper{tau, 2, false}) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("per-pair terms are strictly positive") {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<VecX<double>> emb;
      for (int i = 0; i < 6; ++i) emb.push_back(random_matrix(rng, 4, 1).col(0));
      CHECK(contrastive_loss(emb, ContrastiveHyper{0.1, 3, false}) > 0.0);
    }
  }

  SUBCASE("symmetrized form adds the reversed-anchor terms") {
    Rng rng(6);
    std::vector<VecX<double>> emb;
    for (int i = 0; i < 6; ++i) emb.push_back(random_matrix(rng, 4, 1).col(0));
    std::vector<VecX<double>> swapped = emb;
    for (int p = 0; p < 3; ++p) std::swap(swapped[2 * p], swapped[2 * p + 1]);
    const double sym = contrastive_loss(emb, ContrastiveHyper{0.1, 3, true});
    const double fwd = contrastive_loss(emb, ContrastiveHyper{0.1, 3, false});
    const double rev = contrastive_loss(swapped, ContrastiveHyper{0.1, 3, false});
    CHECK(sym == doctest::Approx(fwd + rev).epsilon(1e-12));
  }

  SUBCASE("fewer than two pairs is an error") {
    std::vector<VecX<double>> emb(2, VecX<double>::Ones(3));
    CHECK_THROWS_AS(contrastive_loss(emb, ContrastiveHyper{0.1, 2, false}), Error);
  }
}

TEST_CASE("cosine losses are invariant to positive rescaling of embeddings") {
  Rng rng(41);
  std::vector<VecX<double>> emb;
  std::vector<int> labels;
  for (int t = 0; t < 3; ++t)
    for (int k = 0; k < 2; ++k) {
      emb.push_back(random_matrix(rng, 6, 1).col(0));
      labels.push_back(t);
    }
  const double triplet_base =
      triplet_loss_batch_hard(emb, labels, TripletHyper{0.25});
  const double contrastive_base =
      contrastive_loss(emb, ContrastiveHyper{0.1, 3, false});
  for (double c : {0.1, 3.0, 100.0}) {
    std::vector<VecX<double>> scaled = emb;
    for (auto& e : scaled) e *= c;
    CHECK(std::abs(triplet_loss_batch_hard(scaled, labels, TripletHyper{0.25}) -
                   triplet_base) < 1e-6);
    CHECK(std::abs(contrastive_loss(scaled, ContrastiveHyper{0.1, 3, false}) -
                   contrastive_base) < 1e-6);
  }
}

TEST_CASE("end-to-end gradients match finite differences for every objective") {
  const auto params = init_model<double>(tiny_config(77));
  Rng rng(171);

  SUBCASE("ae") {
    std::vector<MatX<double>> in{random_matrix(rng, 4, 3, 0.03),
                                 random_matrix(rng, 3, 3, 0.03)};
    const FdReport r = finite_difference_check(
        params, ReconstructionBatchLoss<double>::autoencoder(in));
    CHECK(r.max_rel_err <= 1e-4);
  }
  SUBCASE("cae") {
    std::vector<MatX<double>> in{random_matrix(rng, 4, 3, 0.03)};
    std::vector<MatX<double>> tg{random_matrix(rng, 6, 3, 0.03)};
    const FdReport r =
        finite_difference_check(params, ReconstructionBatchLoss<double>(in, tg));
    CHECK(r.max_rel_err <= 1e-4);
  }
  SUBCASE("triplet") {
    std::vector<MatX<double>> frames;
    std::vector<int> labels;
    for (int t = 0; t < 3; ++t)
      for (int k = 0; k < 2; ++k) {
        frames.push_back(random_matrix(rng, 3 + k, 3));
        labels.push_back(t);
      }
    const FdReport r = finite_difference_check(
        params, TripletBatchLoss<double>(frames, labels, TripletHyper{0.25}));
    CHECK(r.max_rel_err <= 1e-4);
  }
  SUBCASE("contrastive") {
    std::vector<MatX<double>> frames;
    for (int i = 0; i < 6; ++i) frames.push_back(random_matrix(rng, 3 + (i % 3), 3));
    const FdReport r = finite_difference_check(
        params,
        ContrastiveBatchLoss<double>(frames, ContrastiveHyper{0.1, 3, false}));
    CHECK(r.max_rel_err <= 1e-4);
  }
}

TEST_CASE("pair-graph components match a brute-force BFS") {
  SyntheticConfig cfg;
  cfg.n_word_types = 10;
  cfg.n_speakers = 3;
  cfg.instances_per_type_per_speaker = 2;
  cfg.template_length_min = 6;
  cfg.template_length_max = 10;
  cfg.seed = 2;
  const SegmentStore store = generate_synthetic(cfg);

  for (std::uint64_t seed : {1, 2, 3}) {
    const PairList pairs = simulate_utd_pairs(store, 25, 0.6, seed);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& [a, b] : pairs.pairs)
      edges.emplace_back(store.index_of(a), store.index_of(b));

    const auto want = brute_force_components(store.size(), edges);
    const PairComponents got = pair_components(store, pairs);

    REQUIRE(got.n_components == static_cast<int>(want.size()));
    std::vector<std::vector<std::size_t>> groups(want.size());
    for (std::size_t i = 0; i < got.segment_indices.size(); ++i)
      groups[got.component_of[i]].push_back(got.segment_indices[i]);
    std::set<std::vector<std::size_t>> got_set(groups.begin(), groups.end());
    std::set<std::vector<std::size_t>> want_set(want.begin(), want.end());
    CHECK(got_set == want_set);
  }
}

TEST_CASE("pk batches: shape, determinism, coverage") {
  SyntheticConfig cfg;
  cfg.n_word_types = 4;
  cfg.n_speakers = 1;
  cfg.instances_per_type_per_speaker = 2;
  cfg.template_length_min = 5;
  cfg.template_length_max = 8;
  cfg.seed = 4;
  const SegmentStore store = generate_synthetic(cfg);

  SUBCASE("P=2 K=2 over a 4-type store gives 2 batches of 4, 2 per type") {
    const auto batches = build_pk_batches(store, 2, 2, 9);
    REQUIRE(batches.size() == 2);
    for (const auto& b : batches) {
      CHECK(b.segment_indices.size() == 4);
      std::map<int, int> counts;
      for (int t : b.type_of) ++counts[t];
      CHECK(counts.size() == 2);
      for (const auto& [t, c] : counts) CHECK(c == 2);
    }
  }

  SUBCASE("same seed, same batches") {
    const auto a = build_pk_batches(store, 2, 2, 13);
    const auto b = build_pk_batches(store, 2, 2, 13);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i].segment_indices == b[i].segment_indices);
  }

  SUBCASE("each epoch covers every eligible type exactly once when P divides") {
    const auto batches = build_pk_batches(store, 2, 2, 21);
    std::set<std::string> seen;
    std::size_t total_types = 0;
    for (const auto& b : batches) {
      std::set<int> in_batch(b.type_of.begin(), b.type_of.end());
      total_types += in_batch.size();
      for (std::size_t i = 0; i < b.segment_indices.size(); ++i)
        seen.insert(store[b.segment_indices[i]].word_label);
    }
    CHECK(total_types == 4);
    CHECK(seen.size() == 4);
  }

  SUBCASE("a single-type trailing chunk is dropped (no negatives exist)") {
    const auto batches = build_pk_batches(store, 3, 2, 21);
    REQUIRE(batches.size() == 1);
    std::set<int> in_batch(batches[0].type_of.begin(), batches[0].type_of.end());
    CHECK(in_batch.size() == 3);
  }

  SUBCASE("insufficient instances is an error") {
    CHECK_THROWS_WITH_AS(build_pk_batches(store, 2, 3, 0),
                         doctest::Contains("instances"), Error);
  }

  SUBCASE("pseudo-type grouping from pairs uses components") {
    PairList pairs;
    pairs.pairs = {{store[0].id, store[1].id},   // component: {0, 1, 2}
                   {store[1].id, store[2].id},
                   {store[4].id, store[5].id}};  // component: {4, 5}
    const auto groups = groups_from_pairs(store, pairs);
    REQUIRE(groups.groups.size() == 2);
    CHECK(groups.groups[0] == std::vector<std::size_t>{0, 1, 2});
    CHECK(groups.groups[1] == std::vector<std::size_t>{4, 5});
  }
}

TEST_CASE("contrastive batches: distinct components, coverage, determinism") {
  SyntheticConfig cfg;
  cfg.n_word_types = 10;
  cfg.n_speakers = 2;
  cfg.instances_per_type_per_speaker = 1;
  cfg.template_length_min = 5;
  cfg.template_length_max = 8;
  cfg.seed = 6;
  const SegmentStore store = generate_synthetic(cfg);  // 20 segments

  PairList pairs;  // 10 disjoint pairs, one per type
  pairs.provenance = PairProvenance::ground_truth;
  for (int t = 0; t < 10; ++t) {
    char a[32], b[32];
    std::snprintf(a, sizeof(a), "syn_w%03d_s00_i00", t);
    std::snprintf(b, sizeof(b), "syn_w%03d_s01_i00", t);
    pairs.pairs.emplace_back(a, b);
  }

  SUBCASE("epoch over 10 disjoint pairs with N=2 gives 5 batches covering all") {
    const auto batches = build_contrastive_batches(store, pairs, 2, 3);
    REQUIRE(batches.size() == 5);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& b : batches) {
      CHECK(b.pair_indices.size() == 2);
      for (const auto& p : b.pair_indices) CHECK(seen.insert(p).second);
    }
    CHECK(seen.size() == 10);
  }

  SUBCASE("no batch holds two pairs of one component") {
    PairList noisy = pairs;  // chain two types into one component
    noisy.pairs.emplace_back("syn_w000_s00_i00", "syn_w001_s00_i00");
    const PairComponents comps = pair_components(store, noisy);
    std::vector<int> comp_of(store.size(), -1);
    for (std::size_t i = 0; i < comps.segment_indices.size(); ++i)
      comp_of[comps.segment_indices[i]] = comps.component_of[i];
    for (std::uint64_t seed : {0, 1, 2, 3}) {
      for (const auto& batch : build_contrastive_batches(store, noisy, 3, seed)) {
        std::set<int> batch_comps;
        for (const auto& [a, b] : batch.pair_indices)
          CHECK(batch_comps.insert(comp_of[a]).second);
      }
    }
  }

  SUBCASE("deterministic per seed") {
    const auto a = build_contrastive_batches(store, pairs, 2, 5);
    const auto b = build_contrastive_batches(store, pairs, 2, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i].pair_indices == b[i].pair_indices);
  }

  SUBCASE("fewer than N distinct components is an error") {
    PairList chained;  // three pairs, one component
    chained.pairs = {{store[0].id, store[1].id},
                     {store[1].id, store[2].id},
                     {store[2].id, store[3].id}};
    CHECK_THROWS_WITH_AS(build_contrastive_batches(store, chained, 3, 0),
                         doctest::Contains("distinct"), Error);
    PairList two;  // and fewer than N pairs at all
    two.pairs = {pairs.pairs[0], pairs.pairs[1]};
    CHECK_THROWS_WITH_AS(build_contrastive_batches(store, two, 3, 0),
                         doctest::Contains("fewer than N pairs"), Error);
  }
}

TEST_CASE("compute_gradients reports divergence as an error") {
  auto params = init_model<double>(tiny_config(99));
  params.value("proj.w").setConstant(1e200);
  params.value("proj.b").setConstant(1e200);
  params.value("out.w").setConstant(1e200);
  std::vector<MatX<double>> in{Eigen::MatrixXd::Constant(3, 3, 1.0)};
  CHECK_THROWS_WITH_AS(
      compute_gradients(params, ReconstructionBatchLoss<double>::autoencoder(in)),
      doctest::Contains("non-finite"), Error);
}
