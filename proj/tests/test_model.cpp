#include <doctest.h>

#include "awe/adam.hpp"
#include "awe/checkpoint.hpp"
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

}  // namespace

TEST_CASE("init_model is deterministic per seed") {
  const Parameters a = init_model<float>(tiny_config(9));
  const Parameters b = init_model<float>(tiny_config(9));
  CHECK(params_bitwise_equal(a, b));
  const Parameters c = init_model<float>(tiny_config(10));
  CHECK_FALSE(params_bitwise_equal(a, c));
}

TEST_CASE("init_model shapes and bounds") {
  ModelConfig cfg;
  cfg.feature_dim = 3;
  cfg.hidden_dim = 8;
  cfg.n_layers = 1;
  cfg.embedding_dim = 4;
  const Parameters p = init_model<float>(cfg);

  CHECK(p.value("proj.w").rows() == 4);
  CHECK(p.value("proj.w").cols() == 8);
  CHECK(p.value("proj.b").rows() == 4);
  CHECK(p.value("proj.b").cols() == 1);
  CHECK(p.value("enc.0.w_ih").rows() == 24);
  CHECK(p.value("enc.0.w_ih").cols() == 3);
  CHECK(p.value("enc.0.w_hh").cols() == 8);
  CHECK(p.value("dec.0.w_ih").cols() == 4);   // decoder layer 0 reads the embedding
  CHECK(p.value("out.w").rows() == 3);

  for (const auto& [name, t] : p.tensors) {
    CHECK(t.trainable);
    const int fan_in = detail::tensor_fan_in(cfg, name);
    if (fan_in == 0) {
      CHECK(t.value.isZero());
    } else {
      const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
      CHECK(t.value.maxCoeff() <= bound);
      CHECK(t.value.minCoeff() >= -bound);
    }
  }
}

TEST_CASE("encode matches a scalar hand-rolled recurrence") {
  ModelConfig cfg;
  cfg.feature_dim = 2;
  cfg.hidden_dim = 4;
  cfg.n_layers = 2;
  cfg.embedding_dim = 3;
  cfg.seed = 123;
  const auto params = init_model<double>(cfg);

  Rng rng(77);
  const Eigen::MatrixXd frames = random_matrix(rng, 3, 2);
  const Eigen::VectorXd got = encode(params, frames);
  const Eigen::VectorXd want = oracle_encode(params, frames);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode of a single frame equals one recurrence step") {
  const auto params = init_model<double>(tiny_config(3));
  Rng rng(5);
  const Eigen::MatrixXd frame = random_matrix(rng, 1, 3);
  CHECK((encode(params, frame) - oracle_encode(params, frame)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("zero parameters give a zero embedding and zero decode") {
  auto params = init_model<float>(tiny_config());
  for (auto& [name, t] : params.tensors) t.value.setZero();
  Rng rng(2);
  const Eigen::MatrixXf frames = random_matrix(rng, 5, 3).cast<float>();
  const Eigen::VectorXf zero_emb = Eigen::VectorXf::Zero(4);
  CHECK(encode(params, frames).isZero());
  CHECK(decode(params, zero_emb, 6).isZero());
}

TEST_CASE("encode is pure: repeated calls agree bitwise") {
  const auto params = init_model<float>(tiny_config(4));
  Rng rng(8);
  const Eigen::MatrixXf frames = random_matrix(rng, 7, 3).cast<float>();
  const Eigen::VectorXf a = encode(params, frames);
  const Eigen::VectorXf b = encode(params, frames);
  CHECK(a == b);
}

TEST_CASE("decode matches the hand-rolled recurrence and shape contract") {
  ModelConfig cfg;
  cfg.feature_dim = 2;
  cfg.hidden_dim = 4;
  cfg.n_layers = 2;
  cfg.embedding_dim = 3;
  cfg.seed = 321;
  const auto params = init_model<double>(cfg);
  Rng rng(11);
  Eigen::VectorXd emb(3);
  emb << 0.3, -1.2, 0.7;

  for (int t_out : {1, 4, 9}) {
    const Eigen::MatrixXd got = decode(params, emb, t_out);
    CHECK(got.rows() == t_out);
    CHECK(got.cols() == 2);
    const Eigen::MatrixXd want = oracle_decode(params, emb, t_out);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("encode/decode reject dimension mismatches") {
  const auto params = init_model<float>(tiny_config());
  const Eigen::MatrixXf wide = Eigen::MatrixXf::Zero(3, 5);
  const Eigen::VectorXf long_emb = Eigen::VectorXf::Zero(7);
  const Eigen::VectorXf ok_emb = Eigen::VectorXf::Zero(4);
  CHECK_THROWS_WITH_AS(encode(params, wide), doctest::Contains("feature_dim"), Error);
  CHECK_THROWS_WITH_AS(decode(params, long_emb, 3),
                       doctest::Contains("embedding_dim"), Error);
  CHECK_THROWS_AS(decode(params, ok_emb, 0), Error);
}

TEST_CASE("compute_gradients: zero loss gives all-zero gradients") {
  // zero output head and zero targets make the reconstruction identically 0
  auto params = init_model<double>(tiny_config(6));
  params.value("out.w").setZero();
  params.value("out.b").setZero();
  std::vector<MatX<double>> inputs{Eigen::MatrixXd::Zero(4, 3)};
  std::vector<MatX<double>> targets{Eigen::MatrixXd::Zero(4, 3)};
  ReconstructionBatchLoss<double> loss(inputs, targets);

  auto [value, grads] = compute_gradients(params, loss);
  CHECK(value == 0.0);
  for (const auto& [name, g] : grads) {
    INFO(name);
    CHECK(g.isZero());
  }
}

TEST_CASE("analytic gradients match central finite differences (reconstruction)") {
  const auto params = init_model<double>(tiny_config(13));
  Rng rng(99);
  // small-magnitude fixtures keep the FD rounding noise (u*|loss|/eps) well
  // below the tolerance for near-exempt gradient elements
  std::vector<MatX<double>> inputs{random_matrix(rng, 4, 3, 0.03),
                                   random_matrix(rng, 6, 3, 0.03)};
  std::vector<MatX<double>> targets{random_matrix(rng, 5, 3, 0.03),
                                    random_matrix(rng, 3, 3, 0.03)};
  ReconstructionBatchLoss<double> loss(inputs, targets);

  const FdReport report = finite_difference_check(params, loss);
  INFO(report.worst_tensor << "(" << report.worst_row << "," << report.worst_col
                           << ")");
  CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("frozen tensors are ignored by adam and never move") {
  auto params = init_model<float>(tiny_config(21));
  params.tensors.at("enc.0.w_ih").trainable = false;
  const Eigen::MatrixXf frozen_before = params.value("enc.0.w_ih");

  AdamStateT<float> state = adam_init(params, {});
  CHECK(state.m.count("enc.0.w_ih") == 0);

  NamedMatrices<float> grads = zero_grads(params);
  for (auto& [name, g] : grads) g.setOnes();
  for (int step = 0; step < 3; ++step) adam_step(params, grads, state);

  CHECK(params.value("enc.0.w_ih") == frozen_before);
  CHECK(state.step == 3);
}

TEST_CASE("adam: zero gradients leave parameters unchanged but advance t") {
  auto params = init_model<float>(tiny_config(22));
  const Parameters before = params;
  AdamStateT<float> state = adam_init(params, {});
  const NamedMatrices<float> grads = zero_grads(params);
  adam_step(params, grads, state);
  CHECK(params_bitwise_equal(params, before));
  CHECK(state.step == 1);
}

TEST_CASE("adam first step matches the closed-form update") {
  // from zero state, theta' = theta - lr * g / (|g| + eps) elementwise
  ModelConfig cfg = tiny_config(23);
  auto params = init_model<double>(cfg);
  const auto before = params;
  AdamHyper hyper;
  hyper.lr = 0.25;
  AdamStateT<double> state = adam_init(params, hyper);

  NamedMatrices<double> grads = zero_grads(params);
  Rng rng(55);
  for (auto& [name, g] : grads)
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = rng.normal();

  adam_step(params, grads, state);

  double max_err = 0.0;
  for (const auto& [name, t] : params.tensors) {
    const auto& g = grads.at(name);
    const auto& b = before.value(name);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        const double expected =
            b(r, c) - hyper.lr * g(r, c) / (std::abs(g(r, c)) + hyper.epsilon);
        max_err = std::max(max_err, std::abs(t.value(r, c) - expected));
      }
  }
  CHECK(max_err < 1e-12);
}

TEST_CASE("gradient clipping rescales to the requested global norm") {
  auto params = init_model<float>(tiny_config(31));
  NamedMatrices<float> grads = zero_grads(params);
  for (auto& [name, g] : grads) g.setConstant(0.5f);
  const double before = global_grad_norm(params, grads);
  REQUIRE(before > 5.0);
  clip_gradients(params, grads, 5.0);
  CHECK(global_grad_norm(params, grads) == doctest::Approx(5.0).epsilon(1e-4));
  // disabled clipping leaves gradients alone
  NamedMatrices<float> grads2 = zero_grads(params);
  for (auto& [name, g] : grads2) g.setConstant(0.5f);
  clip_gradients(params, grads2, 0.0);
  CHECK(global_grad_norm(params, grads2) == doctest::Approx(before));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  TempDir dir;
  Checkpoint ckpt;
  ckpt.params = init_model<float>(tiny_config(41));
  ckpt.params.tensors.at("proj.w").trainable = false;
  ckpt.provenance.fields = {{"objective", "contrastive"},
                            {"stage", "monolingual"},
                            {"seed", "41"}};
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(ckpt, path);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(params_bitwise_equal(loaded.params, ckpt.params));
  CHECK(loaded.provenance.fields == ckpt.provenance.fields);
  CHECK(loaded.params.config == ckpt.params.config);
}

TEST_CASE("checkpoint rejects truncation and future versions") {
  TempDir dir;
  Checkpoint ckpt;
  ckpt.params = init_model<float>(tiny_config(42));
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(ckpt, path);

  SUBCASE("truncated") {
    const std::string bytes = read_file(path);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
    os.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"), Error);
  }

  SUBCASE("future format version") {
    std::string bytes = read_file(path);
    bytes[4] = 99;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("format_version"),
                         Error);
  }
}

TEST_CASE("adaptation policies") {
  Checkpoint ckpt;
  ckpt.params = init_model<float>(tiny_config(51));

  SUBCASE("full_finetune keeps values and unfreezes everything") {
    ckpt.params.tensors.at("enc.0.w_ih").trainable = false;
    const Parameters adapted =
        apply_adaptation_policy(ckpt, {PolicyKind::full_finetune, 0});
    for (const auto& [name, t] : adapted.tensors) {
      CHECK(t.trainable);
      CHECK(t.value == ckpt.params.value(name));
    }
  }

  SUBCASE("cae policy freezes the encoder and re-initializes the decoder") {
    const Parameters adapted =
        apply_adaptation_policy(ckpt, {PolicyKind::cae_policy, 77});
    for (const auto& [name, t] : adapted.tensors) {
      if (name.rfind("enc.", 0) == 0) {
        CHECK_FALSE(t.trainable);
        CHECK(t.value == ckpt.params.value(name));
      } else if (name.rfind("proj.", 0) == 0) {
        CHECK(t.trainable);
        CHECK(t.value == ckpt.params.value(name));
      } else {
        CHECK(t.trainable);
        if (name.find(".b") == std::string::npos && name != "out.b")
          CHECK(t.value != ckpt.params.value(name));
      }
    }
    // deterministic re-initialization
    const Parameters again =
        apply_adaptation_policy(ckpt, {PolicyKind::cae_policy, 77});
    CHECK(params_bitwise_equal(adapted, again));
    const Parameters other =
        apply_adaptation_policy(ckpt, {PolicyKind::cae_policy, 78});
    CHECK_FALSE(params_bitwise_equal(adapted, other));
  }

  SUBCASE("cae policy requires a decoder") {
    ModelConfig no_dec = tiny_config(52);
    no_dec.with_decoder = false;
    Checkpoint lean;
    lean.params = init_model<float>(no_dec);
    CHECK_THROWS_WITH_AS(apply_adaptation_policy(lean, {PolicyKind::cae_policy, 0}),
                         doctest::Contains("decoder"), Error);
  }
}
