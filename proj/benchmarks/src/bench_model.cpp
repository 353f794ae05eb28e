#include <benchmark/benchmark.h>

#include "nvt/ops.hpp"
#include "nvt/rng.hpp"
#include "nvt/vit.hpp"

namespace {

nvt::vit::ViTConfig desk(std::size_t image_size) {
  nvt::vit::ViTConfig c;
  c.image_size = image_size;
  c.patch_size = image_size >= 224 ? 16 : 8;
  c.embed_dim = 64;
  c.depth = 2;
  c.num_heads = 4;
  c.mlp_ratio = 2.0;
  c.num_classes = 8;
  return c;
}

nvt::Tensor batch(std::size_t b, std::size_t size) {
  nvt::Rng rng(7);
  nvt::Tensor x({b, 3, size, size});
  for (double& v : x.mutable_data()) v = nvt::standard_normal(rng);
  return x;
}

// Single-image inference, the latency the CLI bench reports.
void BM_ForwardSingleImage(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto cfg = desk(size);
  const auto params = nvt::vit::init_params(cfg, 0);
  const auto x = batch(1, size);
  const auto noise = nvt::noise::default_noise_config(cfg.depth, nvt::noise::QualityKind::cyclic_shift_add(0.5));
  nvt::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(nvt::vit::forward(params, cfg, x, noise));
}
BENCHMARK(BM_ForwardSingleImage)->Arg(32)->Arg(224)->Arg(384)->Unit(benchmark::kMillisecond);

// One training step's forward and backward on a desk batch.
void BM_TrainStep(benchmark::State& state) {
  const auto cfg = desk(32);
  auto params = nvt::vit::init_params(cfg, 0);
  params.set_requires_grad(true);
  const auto x = batch(32, 32);
  std::vector<std::size_t> labels(32);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % cfg.num_classes;
  const auto noise = nvt::noise::default_noise_config(cfg.depth, nvt::noise::QualityKind::cyclic_shift_add(0.5));
  for (auto _ : state) {
    nvt::label_smoothing_ce(nvt::vit::forward(params, cfg, x, noise, {nvt::vit::Mode::Train}), labels, 0.1).backward();
    params.zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
