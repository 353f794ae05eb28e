#include "nvt/gradient_suite.hpp"

#include "nvt/linalg.hpp"
#include "nvt/noise.hpp"
#include "nvt/ops.hpp"
#include "nvt/rng.hpp"
#include "nvt/vit.hpp"

namespace nvt {

namespace {

constexpr double kVitPointSpread = 0.3;
constexpr double kVitStep = 2e-4;

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = uniform(rng, lo, hi);
  return t;
}

// sum(w * y) for a fixed random w shaped like y.
std::function<Tensor(const Tensor&)> contract(Rng& rng, Shape out_shape, std::function<Tensor(const Tensor&)> f) {
  Tensor w = random_tensor(rng, std::move(out_shape));
  return [w, f = std::move(f)](const Tensor& x) { return sum(mul(f(x), w)); };
}

}  // namespace

std::vector<GradCase> gradient_suite(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x67726164ULL}));
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, Shape out_shape, std::function<Tensor(const Tensor&)> f, Tensor point) {
    cases.push_back({std::move(name), contract(rng, std::move(out_shape), std::move(f)), std::move(point)});
  };

  const Tensor a = random_tensor(rng, {3, 4});
  const Tensor b = random_tensor(rng, {4});
  add_case("add.lhs", {3, 4}, [b](const Tensor& x) { return add(x, b); }, a);
  add_case("add.rhs_broadcast", {3, 4}, [a](const Tensor& x) { return add(a, x); }, b);
  add_case("sub.lhs", {3, 4}, [b](const Tensor& x) { return sub(x, b); }, a);
  add_case("sub.rhs_broadcast", {3, 4}, [a](const Tensor& x) { return sub(a, x); }, b);
  add_case("mul.lhs", {3, 4}, [b](const Tensor& x) { return mul(x, b); }, a);
  add_case("mul.rhs_broadcast", {3, 4}, [a](const Tensor& x) { return mul(a, x); }, b);
  add_case("mul.square", {3, 4}, [](const Tensor& x) { return mul(x, x); }, a);
  add_case("scale", {3, 4}, [](const Tensor& x) { return scale(x, -2.5); }, a);

  const Tensor m = random_tensor(rng, {2, 3, 4});
  const Tensor n = random_tensor(rng, {4, 5});
  add_case("matmul.lhs_batched", {2, 3, 5}, [n](const Tensor& x) { return matmul(x, n); }, m);
  add_case("matmul.rhs_broadcast", {2, 3, 5}, [m](const Tensor& x) { return matmul(m, x); }, n);
  cases.push_back({"sum", [](const Tensor& x) { return sum(x); }, m});
  cases.push_back({"mean", [](const Tensor& x) { return mean(mul(x, x)); }, m});
  add_case("reshape", {4, 6}, [](const Tensor& x) { return reshape(x, {4, 6}); }, m);
  add_case("permute", {4, 2, 3}, [](const Tensor& x) { return permute(x, {2, 0, 1}); }, m);
  add_case("transpose", {4, 3}, [](const Tensor& x) { return transpose(x); }, a);
  add_case("slice", {2, 2, 4}, [](const Tensor& x) { return slice(x, 1, 1, 2); }, m);
  add_case("concat", {2, 5, 4}, [m](const Tensor& x) { return concat({x, slice(m, 1, 0, 2)}, 1); }, m);

  add_case("softmax.last", {2, 3, 4}, [](const Tensor& x) { return softmax(x, 2); }, m);
  add_case("softmax.middle", {2, 3, 4}, [](const Tensor& x) { return softmax(x, 1); }, m);
  const Tensor gamma = random_tensor(rng, {4}, 0.5, 1.5);
  const Tensor beta = random_tensor(rng, {4});
  add_case("layer_norm.x", {2, 3, 4}, [gamma, beta](const Tensor& x) { return layer_norm(x, gamma, beta, 1e-6); }, m);
  add_case("layer_norm.gamma", {2, 3, 4}, [m, beta](const Tensor& g) { return layer_norm(m, g, beta, 1e-6); }, gamma);
  add_case("layer_norm.beta", {2, 3, 4}, [m, gamma](const Tensor& bb) { return layer_norm(m, gamma, bb, 1e-6); }, beta);
  add_case("gelu", {2, 3, 4}, [](const Tensor& x) { return gelu(x); }, random_tensor(rng, {2, 3, 4}, -3.0, 3.0));

  const std::vector<std::size_t> labels{2, 0, 4};
  cases.push_back({"label_smoothing_ce",
                   [labels](const Tensor& x) { return label_smoothing_ce(x, labels, 0.1); },
                   random_tensor(rng, {3, 5}, -2.0, 2.0)});
  add_case("patchify", {2, 4, 12}, [](const Tensor& x) { return patchify(x, 2); }, random_tensor(rng, {2, 3, 4, 4}));

  const auto q_mix = noise::build_quality_matrix(noise::QualityKind::cyclic_mix(0.3), 3);
  const auto q_add = noise::build_quality_matrix(noise::QualityKind::cyclic_shift_add(0.5), 3);
  add_case("inject.cyclic_mix", {3, 2, 4}, [q_mix](const Tensor& x) { return inject(x, q_mix); }, random_tensor(rng, {3, 2, 4}));
  add_case("inject.cyclic_shift_add", {3, 2, 4}, [q_add](const Tensor& x) { return inject(x, q_add); },
           random_tensor(rng, {3, 2, 4}));

  vit::ViTConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 8;
  cfg.embed_dim = 16;
  cfg.depth = 2;
  cfg.num_heads = 2;
  cfg.num_classes = 5;
  // Init-scale weights (std 0.02) leave many gradients near the loss's ulp /
  // step; a wider random point keeps them measurable by central differences.
  const vit::ModelParams params = [&] {
    vit::ModelParams p = vit::init_params(cfg, derive_seed(seed, {0x766974ULL}));
    for (auto& nt : p.named())
      for (double& v : nt.tensor.mutable_data()) v += uniform(rng, -kVitPointSpread, kVitPointSpread);
    return p;
  }();
  const Tensor images = random_tensor(rng, {2, 3, 32, 32});
  const std::vector<std::size_t> vit_labels{1, 3};
  const std::optional<noise::NoiseConfig> noise_cfg =
      noise::default_noise_config(cfg.depth, noise::QualityKind::cyclic_shift_add(0.5));
  auto loss_with = [cfg, vit_labels, noise_cfg](const vit::ModelParams& p, const Tensor& x) {
    return label_smoothing_ce(vit::forward(p, cfg, x, noise_cfg, {vit::Mode::Eval}), vit_labels, 0.1);
  };
  cases.push_back({"vit.loss.images", [params, loss_with](const Tensor& x) { return loss_with(params, x); }, images, kVitStep});
  cases.push_back({"vit.loss.head_weight",
                   [params, images, loss_with](const Tensor& w) {
                     vit::ModelParams p = params;
                     p.head.weight = w;
                     return loss_with(p, images);
                   },
                   params.head.weight, kVitStep});
  cases.push_back({"vit.loss.qkv_weight_block0",
                   [params, images, loss_with](const Tensor& w) {
                     vit::ModelParams p = params;
                     p.blocks[0].qkv.weight = w;
                     return loss_with(p, images);
                   },
                   params.blocks[0].qkv.weight, kVitStep});
  cases.push_back({"vit.loss.fc1_weight_block1",
                   [params, images, loss_with](const Tensor& w) {
                     vit::ModelParams p = params;
                     p.blocks[1].fc1.weight = w;
                     return loss_with(p, images);
                   },
                   params.blocks[1].fc1.weight, kVitStep});
  cases.push_back({"vit.loss.patch_embed_weight",
                   [params, images, loss_with](const Tensor& w) {
                     vit::ModelParams p = params;
                     p.patch_embed.weight = w;
                     return loss_with(p, images);
                   },
                   params.patch_embed.weight, kVitStep});
  cases.push_back({"vit.loss.pos_embed",
                   [params, images, loss_with](const Tensor& w) {
                     vit::ModelParams p = params;
                     p.pos_embed = w;
                     return loss_with(p, images);
                   },
                   params.pos_embed, kVitStep});
  cases.push_back({"vit.loss.cls_token",
                   [params, images, loss_with](const Tensor& w) {
                     vit::ModelParams p = params;
                     p.cls_token = w;
                     return loss_with(p, images);
                   },
                   params.cls_token, kVitStep});
  cases.push_back({"vit.loss.norm1_gamma_block0",
                   [params, images, loss_with](const Tensor& w) {
                     vit::ModelParams p = params;
                     p.blocks[0].norm1.weight = w;
                     return loss_with(p, images);
                   },
                   params.blocks[0].norm1.weight, kVitStep});
  return cases;
}

std::vector<GradCaseResult> run_gradient_suite(std::uint64_t seed, double tolerance) {
  std::vector<GradCaseResult> out;
  for (const GradCase& c : gradient_suite(seed)) {
    const double err = grad_check(c.fn, c.point, c.step);
    out.push_back({c.name, err, err <= tolerance});
  }
  return out;
}

}  // namespace nvt
