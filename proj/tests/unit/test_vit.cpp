#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nvt/checkpoint.hpp"
#include "nvt/container.hpp"
#include "nvt/error.hpp"
#include "nvt/ops.hpp"
#include "nvt/vit.hpp"

using namespace nvt;
using testutil::bit_equal;
using testutil::random_tensor;

namespace {

vit::ViTConfig desk(std::size_t classes = 4) {
  vit::ViTConfig c;
  c.image_size = 32;
  c.patch_size = 8;
  c.embed_dim = 16;
  c.depth = 2;
  c.num_heads = 2;
  c.num_classes = classes;
  return c;
}

std::uint64_t enumerate_sizes(const vit::ModelParams& p) {
  std::uint64_t n = 0;
  for (const auto& nt : p.named()) n += nt.tensor.numel();
  return n;
}

Tensor permute_batch(const Tensor& x, const std::vector<std::size_t>& perm) {
  std::vector<Tensor> rows;
  for (std::size_t i : perm) rows.push_back(slice(x, 0, i, 1));
  return concat(rows, 0);
}

}  // namespace

TEST_SUITE("vit-model") {
  TEST_CASE("config validation") {
    vit::ViTConfig c = desk();
    CHECK_NOTHROW(c.validate());
    c.image_size = 30;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = desk();
    c.num_heads = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = desk();
    c.num_classes = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = desk();
    c.drop_rate = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("sequence lengths for the two resolutions") {
    CHECK(vit::ViTConfig::base16(224, 1000).seq_len() == 197);
    CHECK(vit::ViTConfig::base16(384, 1000).seq_len() == 577);
  }

  TEST_CASE("param_count for ViT-B/16 at 224 is within 1% of 86M") {
    const auto cfg = vit::ViTConfig::base16(224, 1000);
    const std::uint64_t n = vit::param_count(cfg);
    CHECK(n == 86567656u);
    CHECK(std::abs(static_cast<double>(n) - 86e6) / 86e6 < 0.01);
    std::uint64_t from_shapes = 0;
    for (const auto& [name, shape] : vit::param_shapes(cfg)) from_shapes += numel(shape);
    CHECK(from_shapes == n);
  }

  TEST_CASE("param_count matches brute-force enumeration on desk configs") {
    vit::ViTConfig c = desk();
    c.mlp_ratio = 4.0;
    CHECK(vit::param_count(c) == enumerate_sizes(vit::init_params(c, 0)));
    c.embed_dim = 32;
    c.num_heads = 4;
    c.mlp_ratio = 2.0;
    c.num_classes = 7;
    CHECK(vit::param_count(c) == enumerate_sizes(vit::init_params(c, 1)));
  }

  TEST_CASE("param_count is affine in depth") {
    vit::ViTConfig c = desk();
    const auto p1 = vit::param_count(c);
    c.depth = 3;
    const auto p2 = vit::param_count(c);
    c.depth = 4;
    const auto p3 = vit::param_count(c);
    CHECK(p3 - p2 == p2 - p1);
  }

  TEST_CASE("init_params is deterministic and truncated") {
    const auto cfg = desk();
    const auto a = vit::init_params(cfg, 5), b = vit::init_params(cfg, 5), c = vit::init_params(cfg, 6);
    const auto na = a.named(), nb = b.named(), nc = c.named();
    bool any_diff = false;
    for (std::size_t i = 0; i < na.size(); ++i) {
      CHECK(bit_equal(na[i].tensor, nb[i].tensor));
      if (!bit_equal(na[i].tensor, nc[i].tensor)) any_diff = true;
    }
    CHECK(any_diff);
    for (const auto& nt : a.named()) {
      const bool is_norm_scale = nt.name.find("norm") != std::string::npos && nt.name.ends_with(".weight");
      for (double v : nt.tensor.data()) {
        if (is_norm_scale)
          CHECK(v == 1.0);
        else
          CHECK(std::abs(v) <= 0.04);
      }
      if (nt.name.ends_with(".bias") || nt.name == "cls_token")
        for (double v : nt.tensor.data()) CHECK(v == 0.0);
    }
  }

  TEST_CASE("forward returns [B, classes] and every layer sees 1 + N tokens") {
    const auto cfg = desk(5);
    const auto params = vit::init_params(cfg, 1);
    Rng rng(2);
    vit::ForwardTrace trace;
    const Tensor logits = vit::forward(params, cfg, random_tensor(rng, {3, 3, 32, 32}), std::nullopt, {vit::Mode::Eval, 0, &trace});
    CHECK(logits.shape() == Shape{3, 5});
    REQUIRE(trace.layer_inputs.size() == cfg.depth);
    for (const Shape& s : trace.layer_inputs) CHECK(s == Shape{3, 17, 16});
    CHECK_THROWS_AS(vit::forward(params, cfg, Tensor({1, 3, 16, 16}), std::nullopt), ShapeError);
  }

  TEST_CASE("identity noise is bit-identical to no noise; other noise changes logits") {
    const auto cfg = desk();
    const auto params = vit::init_params(cfg, 3);
    Rng rng(4);
    const Tensor x = random_tensor(rng, {4, 3, 32, 32});
    const Tensor plain = vit::forward(params, cfg, x, std::nullopt);
    const Tensor ident = vit::forward(params, cfg, x, noise::default_noise_config(2, noise::QualityKind::identity()));
    CHECK(bit_equal(plain, ident));
    const Tensor noisy = vit::forward(params, cfg, x, noise::default_noise_config(2, noise::QualityKind::cyclic_shift_add(0.5)));
    CHECK(testutil::max_abs_diff(plain, noisy) > 0.0);
    CHECK_THROWS_AS(vit::forward(params, cfg, x, noise::NoiseConfig{2, noise::QualityKind::identity(), std::nullopt}),
                    ConfigError);
  }

  TEST_CASE("noise at an earlier layer differs from noise at the last layer") {
    const auto cfg = desk();
    const auto params = vit::init_params(cfg, 3);
    Rng rng(4);
    const Tensor x = random_tensor(rng, {3, 3, 32, 32});
    const auto q = noise::QualityKind::cyclic_mix(0.3);
    const Tensor l0 = vit::forward(params, cfg, x, noise::NoiseConfig{0, q, std::nullopt});
    const Tensor l1 = vit::forward(params, cfg, x, noise::NoiseConfig{1, q, std::nullopt});
    CHECK(testutil::max_abs_diff(l0, l1) > 0.0);
  }

  TEST_CASE("logits are permutation-equivariant over the batch") {
    const auto cfg = desk();
    const auto params = vit::init_params(cfg, 8);
    Rng rng(9);
    const Tensor x = random_tensor(rng, {4, 3, 32, 32});
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    const Tensor base = vit::forward(params, cfg, x, std::nullopt);
    const Tensor permuted = vit::forward(params, cfg, permute_batch(x, perm), std::nullopt);
    CHECK(testutil::max_abs_diff(permute_batch(base, perm), permuted) < 1e-12);

    // With noise, permuting Q consistently (P Q P^T) keeps equivariance.
    const auto qm = noise::build_quality_matrix(noise::QualityKind::cyclic_shift_add(0.5), 4);
    std::vector<std::vector<double>> q(4, std::vector<double>(4)), qp(4, std::vector<double>(4));
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) q[r][c] = qm.realized.at({r, c});
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) qp[r][c] = q[perm[r]][perm[c]];
    const Tensor nb = vit::forward(params, cfg, x, noise::default_noise_config(2, noise::QualityKind::custom_matrix(q)));
    const Tensor np = vit::forward(params, cfg, permute_batch(x, perm),
                                   noise::default_noise_config(2, noise::QualityKind::custom_matrix(qp)));
    CHECK(testutil::max_abs_diff(permute_batch(nb, perm), np) < 1e-12);
  }

  TEST_CASE("train and eval modes agree without dropout; forward is deterministic") {
    const auto cfg = desk();
    const auto params = vit::init_params(cfg, 10);
    Rng rng(11);
    const Tensor x = random_tensor(rng, {2, 3, 32, 32});
    const auto nz = noise::default_noise_config(2, noise::QualityKind::cyclic_mix(0.25));
    const Tensor e = vit::forward(params, cfg, x, nz, {vit::Mode::Eval});
    CHECK(bit_equal(e, vit::forward(params, cfg, x, nz, {vit::Mode::Train, 123})));
    CHECK(bit_equal(e, vit::forward(params, cfg, x, nz, {vit::Mode::Eval})));

    vit::ViTConfig dcfg = cfg;
    dcfg.drop_rate = 0.2;
    const Tensor t1 = vit::forward(params, dcfg, x, nz, {vit::Mode::Train, 5});
    const Tensor t2 = vit::forward(params, dcfg, x, nz, {vit::Mode::Train, 5});
    CHECK(bit_equal(t1, t2));
    CHECK(testutil::max_abs_diff(t1, vit::forward(params, dcfg, x, nz, {vit::Mode::Eval})) > 0.0);
  }

  TEST_CASE("resize_pos_embed examples") {
    Rng rng(1);
    const Tensor table = random_tensor(rng, {1 + 16, 3});
    CHECK(bit_equal(vit::resize_pos_embed(table, 4, 4), table));

    const Tensor constant({1 + 4, 2}, 0.25);
    const Tensor grown = vit::resize_pos_embed(constant, 2, 5);
    REQUIRE(grown.shape() == Shape{26, 2});
    for (double v : grown.data()) CHECK(std::abs(v - 0.25) < 1e-15);

    // linear ramp f(y, x) = 1 + 2y + 3x on the unit square
    Tensor ramp({1 + 4, 1});
    ramp.mutable_data()[0] = 42.0;
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) ramp.mutable_data()[1 + y * 2 + x] = 1.0 + 2.0 * y + 3.0 * x;
    const Tensor up = vit::resize_pos_embed(ramp, 2, 4);
    CHECK(up.at({0, 0}) == 42.0);
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x)
        CHECK(std::abs(up.at({1 + y * 4 + x, 0}) - (1.0 + 2.0 * (y / 3.0) + 3.0 * (x / 3.0))) < 1e-12);
  }

  TEST_CASE("adapt_resolution resamples only the positional table") {
    const auto cfg = desk();
    const auto params = vit::init_params(cfg, 2);
    const auto big = vit::adapt_resolution(params, cfg, 64);
    CHECK(big.pos_embed.shape() == Shape{1 + 64, 16});
    CHECK(big.head.weight.same_storage(params.head.weight));
    vit::ViTConfig bc = cfg;
    bc.image_size = 64;
    CHECK_NOTHROW(vit::check_params(big, bc));
  }

  TEST_CASE("checkpoint round trip is bit-exact, including noise") {
    testutil::TempDir dir("ckpt");
    const auto cfg = desk();
    const auto params = vit::init_params(cfg, 12);
    noise::NoiseConfig nz = noise::random_layer_noise_config(cfg.depth, noise::QualityKind::cyclic_shift_add(0.375), 99);
    vit::CheckpointMeta meta;
    meta.best_val_top1 = 0.625;
    meta.epoch = 3;
    meta.class_names = {"a", "b", "c", "d"};
    meta.norm_stats = data::NormStats{{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
    meta.eval_batch_size = 8;
    vit::save_checkpoint(dir / "m.nvt", params, cfg, nz, meta);
    const vit::Checkpoint ck = vit::load_checkpoint(dir / "m.nvt");
    CHECK(ck.config == cfg);
    REQUIRE(ck.noise.has_value());
    CHECK(*ck.noise == nz);
    CHECK(ck.meta.epoch == 3);
    CHECK(ck.meta.best_val_top1 == 0.625);
    CHECK(ck.meta.class_names == meta.class_names);
    CHECK(ck.meta.norm_stats == meta.norm_stats);
    CHECK(ck.meta.eval_batch_size == meta.eval_batch_size);
    const auto a = params.named(), b = ck.params.named();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].name == b[i].name);
      CHECK(bit_equal(a[i].tensor, b[i].tensor));
    }
    Rng rng(13);
    const Tensor x = random_tensor(rng, {3, 3, 32, 32});
    CHECK(bit_equal(vit::forward(params, cfg, x, nz), vit::forward(ck.params, ck.config, x, ck.noise)));
  }

  TEST_CASE("checkpoint without noise loads as none; tampering is a format error") {
    const auto cfg = desk();
    auto bytes = vit::encode_checkpoint(vit::init_params(cfg, 1), cfg, std::nullopt, {});
    CHECK_FALSE(vit::decode_checkpoint(bytes).noise.has_value());

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(vit::decode_checkpoint(bad_magic), FormatError);
    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    try {
      vit::decode_checkpoint(truncated);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() > 0);
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_WITH_AS(vit::decode_checkpoint(bad_version), doctest::Contains("version"), FormatError);
  }
}
