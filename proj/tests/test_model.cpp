/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cslr/ctc.hpp"
#include "cslr/model.hpp"
#include "helpers.hpp"

using namespace cslr;
using cslr_test::random_matrix;
using cslr_test::scratch_dir;

namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.d_model = 16;
  cfg.n_blocks = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  cfg.dropout = 0.1;
  cfg.conv_kernel = 3;
  cfg.vocab_size = 5;
  return cfg;
}

GlossVocabulary toy_vocab() {
  return GlossVocabulary(std::vector<std::string>{"g1", "g2", "g3", "g4",
                                                  "g5"});
}

}  // namespace

TEST_CASE("subsampled_length is ceil(T/4)") {
  Rng rng(301);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index t = 1 + static_cast<Eigen::Index>(rng.uniform_int(0, 299));
    CHECK(subsampled_length(t) == (t + 3) / 4);
  }
  CHECK(subsampled_length(1) == 1);
  CHECK(subsampled_length(4) == 1);
  CHECK(subsampled_length(5) == 2);
  CHECK(subsampled_length(300) == 75);
}

TEST_CASE("forward shape laws on randomized lengths") {
  ModelConfig cfg = toy_config();
  auto params = init_params<double>(cfg, 17);
  Rng rng(302);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index t = 1 + static_cast<Eigen::Index>(rng.uniform_int(0, 60));
    const DenseMatrix<double> x = random_matrix(rng, t, cfg.input_dim);
    const auto out = forward(x, t, params, cfg, false);
    CAPTURE(t);
    CHECK(out.log_probs.rows() == (t + 3) / 4);
    CHECK(out.log_probs.cols() == cfg.n_classes());
    CHECK(out.valid_len == (t + 3) / 4);
    // Rows are normalized log-distributions.
    for (Eigen::Index r = 0; r < out.valid_len; ++r)
      CHECK(out.log_probs.value().row(r).array().exp().sum() ==
            doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("default config is Isharah-shaped") {
  ModelConfig cfg;  // defaults
  CHECK(cfg.input_dim == 492);
  CHECK(cfg.d_model == 512);
  CHECK(cfg.n_blocks == 8);
  CHECK(cfg.subsample_factor == 4);
  CHECK(cfg.n_classes() == 1001);
  auto params = init_params<float>(cfg, 1);
  CHECK(params.sub.conv1.w.rows() == 3 * 492);
  CHECK(params.sub.conv1.w.cols() == 512);
  CHECK(params.sub.proj.w.cols() == 512);
  CHECK(params.classifier.w.rows() == 512);
  CHECK(params.classifier.w.cols() == 1001);
  CHECK(params.blocks.size() == 8);

  // One real pass through the full-size encoder.
  Rng rng(303);
  const DenseMatrix<float> x = random_matrix(rng, 8, 492).cast<float>();
  const auto out = forward<float>(x, 8, params, cfg, false);
  CHECK(out.log_probs.rows() == 2);
  CHECK(out.log_probs.cols() == 1001);
  CHECK(out.log_probs.value().allFinite());
  for (Eigen::Index r = 0; r < 2; ++r)
    CHECK(out.log_probs.value().row(r).array().exp().sum() ==
          doctest::Approx(1.0f).epsilon(1e-3));
}

TEST_CASE("positional encoding values") {
  const auto pe = positional_encoding<double>(4, 6);
  CHECK(pe.rows() == 4);
  CHECK(pe.cols() == 6);
  // Position 0: sin(0) = 0, cos(0) = 1 in alternating columns.
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(pe(0, 2 * i) == 0.0);
    CHECK(pe(0, 2 * i + 1) == 1.0);
  }
  // First pair uses rate 10000^0 = 1.
  CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
  CHECK(pe(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
  CHECK(pe(3, 0) == doctest::Approx(std::sin(3.0)).epsilon(1e-15));
  // Second pair divides position by 10000^(2/6).
  const double rate = std::pow(10000.0, 2.0 / 6.0);
  CHECK(pe(2, 2) == doctest::Approx(std::sin(2.0 / rate)).epsilon(1e-15));
  CHECK(pe(2, 3) == doctest::Approx(std::cos(2.0 / rate)).epsilon(1e-15));

  CHECK_THROWS_AS(positional_encoding<double>(4, 5), ConfigError);
  CHECK_THROWS_AS(positional_encoding<double>(0, 6), ValidationError);
}

TEST_CASE("padded and unpadded forward agree on the valid prefix") {
  ModelConfig cfg = toy_config();
  auto params = init_params<double>(cfg, 5);
  Rng rng(304);
  for (Eigen::Index valid : {1, 5, 9, 12}) {
    DenseMatrix<double> x = random_matrix(rng, 16, cfg.input_dim);
    const auto padded = forward(x, valid, params, cfg, false);
    const auto exact =
        forward(DenseMatrix<double>(x.topRows(valid)), valid, params, cfg,
                false);
    REQUIRE(padded.valid_len == exact.valid_len);
    const double diff = (padded.log_probs.value().topRows(padded.valid_len) -
                         exact.log_probs.value())
                            .cwiseAbs()
                            .maxCoeff();
    CAPTURE(valid);
    CHECK(diff <= 1e-12);
  }
}

TEST_CASE("end-to-end gradient matches finite differences") {
  ModelConfig cfg = toy_config();
  cfg.dropout = 0.0;
  auto params = init_params<double>(cfg, 23);
  Rng rng(305);
  const DenseMatrix<double> x = random_matrix(rng, 12, cfg.input_dim);
  const CtcTarget target = CtcTarget::from_ids({2, 4}, cfg.n_classes());

  auto loss_value = [&]() {
    NoGradGuard guard;
    auto out = forward(x, 12, params, cfg, false);
    return ctc_loss_node(out.log_probs, target, out.valid_len).value()(0, 0);
  };

  // One recorded pass for the analytic gradients.
  auto named = params.named();
  for (auto& [name, t] : named) t->zero_grad();
  {
    auto out = forward(x, 12, params, cfg, false);
    auto loss = ctc_loss_node(out.log_probs, target, out.valid_len);
    backward(loss);
  }

  // Probe 20 parameters spread across distinct tensors.
  double worst = 0.0;
  for (int probe = 0; probe < 20; ++probe) {
    auto& [name, t] = named[(probe * 7) % named.size()];
    const Eigen::Index i =
        static_cast<Eigen::Index>(rng.uniform_int(0, t->rows() - 1));
    const Eigen::Index j =
        static_cast<Eigen::Index>(rng.uniform_int(0, t->cols() - 1));
    const double fd =
        cslr_test::central_diff(t->mutable_value(), i, j, loss_value, 1e-5);
    const double err = cslr_test::rel_err(t->grad()(i, j), fd);
    CAPTURE(name);
    CHECK(err <= 1e-3);
    worst = std::max(worst, err);
  }
  MESSAGE("worst parameter-gradient relative error: ", worst);
}

TEST_CASE("init determinism and seed sensitivity") {
  ModelConfig cfg = toy_config();
  auto a = init_params<double>(cfg, 99);
  auto b = init_params<double>(cfg, 99);
  auto c = init_params<double>(cfg, 100);
  bool identical = true;
  bool any_differs = false;
  auto na = a.named();
  auto nb = b.named();
  auto nc = c.named();
  for (std::size_t k = 0; k < na.size(); ++k) {
    if (na[k].second->value() != nb[k].second->value()) identical = false;
    if (na[k].second->value() != nc[k].second->value()) any_differs = true;
  }
  CHECK(identical);
  CHECK(any_differs);
  CHECK(a.parameter_count() == b.parameter_count());

  // clone_params detaches: editing the clone leaves the source untouched.
  auto clone = clone_params(a);
  clone.classifier.w.mutable_value()(0, 0) += 1.0;
  CHECK(clone.classifier.w.value()(0, 0) !=
        a.classifier.w.value()(0, 0));
}

TEST_CASE("training mode contracts") {
  ModelConfig cfg = toy_config();
  auto params = init_params<double>(cfg, 7);
  Rng rng(306);
  const DenseMatrix<double> x = random_matrix(rng, 10, cfg.input_dim);

  SUBCASE("training without an rng is a usage error") {
    CHECK_THROWS_AS(forward(x, 10, params, cfg, true), UsageError);
  }
  SUBCASE("training pass stays finite with dropout and augmentation") {
    AugmentConfig aug;
    aug.p_time = 1.0;
    aug.p_feat = 1.0;
    const auto out = forward(x, 10, params, cfg, true, &rng, &aug);
    CHECK(out.log_probs.value().allFinite());
    CHECK(out.log_probs.rows() == 3);
  }
  SUBCASE("layer_drop one short of certain skips blocks but stays finite") {
    ModelConfig ld = cfg;
    ld.layer_drop = 0.99;
    const auto out = forward(x, 10, params, ld, true, &rng);
    CHECK(out.log_probs.value().allFinite());
  }
}

TEST_CASE("forward input validation") {
  ModelConfig cfg = toy_config();
  auto params = init_params<double>(cfg, 7);
  Rng rng(307);
  DenseMatrix<double> x = random_matrix(rng, 10, cfg.input_dim);

  CHECK_THROWS_AS(
      forward(DenseMatrix<double>(random_matrix(rng, 10, 5)), 10, params, cfg,
              false),
      ShapeError);
  CHECK_THROWS_AS(forward(x, 0, params, cfg, false), ValidationError);
  CHECK_THROWS_AS(forward(x, 11, params, cfg, false), ValidationError);
  DenseMatrix<double> bad = x;
  bad(3, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward(bad, 10, params, cfg, false), ValidationError);
}

TEST_CASE("model config validation and kv round-trip") {
  ModelConfig cfg = toy_config();
  CHECK_NOTHROW(cfg.validate());
  auto expect_config_error = [](auto mutate) {
    ModelConfig c;
    c.input_dim = 6;
    c.d_model = 16;
    c.n_blocks = 2;
    c.n_heads = 2;
    c.d_ff = 32;
    c.conv_kernel = 3;
    c.vocab_size = 5;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  expect_config_error([](ModelConfig& c) { c.conv_kernel = 4; });
  expect_config_error([](ModelConfig& c) { c.n_heads = 3; });
  expect_config_error([](ModelConfig& c) { c.d_model = 15; });
  expect_config_error([](ModelConfig& c) { c.subsample_factor = 2; });
  expect_config_error([](ModelConfig& c) { c.dropout = 1.0; });
  expect_config_error([](ModelConfig& c) { c.layer_drop = -0.1; });
  expect_config_error([](ModelConfig& c) { c.vocab_size = 0; });

  const ModelConfig back = ModelConfig::from_kv(cfg.to_kv());
  CHECK(back.input_dim == cfg.input_dim);
  CHECK(back.d_model == cfg.d_model);
  CHECK(back.n_blocks == cfg.n_blocks);
  CHECK(back.n_heads == cfg.n_heads);
  CHECK(back.d_ff == cfg.d_ff);
  CHECK(back.dropout == cfg.dropout);
  CHECK(back.conv_kernel == cfg.conv_kernel);
  CHECK(back.vocab_size == cfg.vocab_size);
  CHECK(back.layer_drop == cfg.layer_drop);
}

TEST_CASE("checkpoint round-trip preserves everything") {
  const auto dir = scratch_dir("ckpt");
  ModelConfig cfg = toy_config();
  auto params = init_params<double>(cfg, 41);
  const GlossVocabulary vocab = toy_vocab();
  const auto path = dir / "model.ckpt";
  save_checkpoint(path, params, cfg, vocab);

  auto ckpt = load_checkpoint<double>(path);
  CHECK(ckpt.config.d_model == cfg.d_model);
  CHECK(ckpt.config.vocab_size == cfg.vocab_size);
  CHECK(ckpt.vocab.tokens() == vocab.tokens());

  auto na = params.named();
  auto nb = ckpt.params.named();
  REQUIRE(na.size() == nb.size());
  for (std::size_t k = 0; k < na.size(); ++k) {
    CHECK(na[k].first == nb[k].first);
    CHECK(na[k].second->value() == nb[k].second->value());
  }

  // Loaded model reproduces the original forward bitwise.
  Rng rng(308);
  const DenseMatrix<double> x = random_matrix(rng, 9, cfg.input_dim);
  const auto before = forward(x, 9, params, cfg, false);
  const auto after = forward(x, 9, ckpt.params, ckpt.config, false);
  CHECK(before.log_probs.value() == after.log_probs.value());
}

TEST_CASE("checkpoint integrity failures are typed") {
  const auto dir = scratch_dir("ckpt_bad");
  ModelConfig cfg = toy_config();
  auto params = init_params<double>(cfg, 41);
  const GlossVocabulary vocab = toy_vocab();

  SUBCASE("bad magic") {
    const auto path = dir / "magic.ckpt";
    save_checkpoint(path, params, cfg, vocab);
    auto bytes = [&] {
      std::ifstream is(path, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(is), {});
    }();
    bytes[0] = 'X';
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    CHECK_THROWS_AS(load_checkpoint<double>(path), ParseError);
  }
  SUBCASE("truncation") {
    const auto path = dir / "trunc.ckpt";
    save_checkpoint(path, params, cfg, vocab);
    auto bytes = [&] {
      std::ifstream is(path, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(is), {});
    }();
    bytes.resize(bytes.size() / 2);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    CHECK_THROWS_AS(load_checkpoint<double>(path), ParseError);
  }
  SUBCASE("missing tensor") {
    // Params hold fewer blocks than the declared config, so the loader
    // visits a name the file never wrote.
    ModelConfig small = cfg;
    small.n_blocks = 1;
    auto small_params = init_params<double>(small, 41);
    const auto path = dir / "missing.ckpt";
    save_checkpoint(path, small_params, cfg, vocab);
    CHECK_THROWS_AS(load_checkpoint<double>(path), ParseError);
  }
  SUBCASE("unexpected extra tensor") {
    ModelConfig small = cfg;
    small.n_blocks = 1;
    const auto path = dir / "extra.ckpt";
    save_checkpoint(path, params, small, vocab);
    CHECK_THROWS_AS(load_checkpoint<double>(path), ParseError);
  }
  SUBCASE("mis-shaped tensor") {
    ModelConfig wide = cfg;
    wide.d_ff = 64;
    const auto path = dir / "shape.ckpt";
    save_checkpoint(path, params, wide, vocab);
    CHECK_THROWS_AS(load_checkpoint<double>(path), ParseError);
  }
  SUBCASE("vocab size mismatch") {
    const auto path = dir / "vocab.ckpt";
    save_checkpoint(path, params, cfg,
                    GlossVocabulary(std::vector<std::string>{"only"}));
    CHECK_THROWS_AS(load_checkpoint<double>(path), ValidationError);
  }
}
