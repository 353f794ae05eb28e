#include <benchmark/benchmark.h>

#include "nvt/linalg.hpp"
#include "nvt/noise.hpp"
#include "nvt/ops.hpp"
#include "nvt/rng.hpp"

namespace {

nvt::Tensor random_tensor(nvt::Rng& rng, nvt::Shape shape) {
  nvt::Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = nvt::standard_normal(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  nvt::Rng rng(1);
  const nvt::Tensor a = random_tensor(rng, {n, n}), b = random_tensor(rng, {n, n});
  nvt::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(nvt::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  nvt::Rng rng(2);
  nvt::Tensor a = random_tensor(rng, {n, n}), b = random_tensor(rng, {n, n});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    nvt::sum(nvt::matmul(a, b)).backward();
    a.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_Softmax(benchmark::State& state) {
  nvt::Rng rng(3);
  const nvt::Tensor x = random_tensor(rng, {12, 197, 197});
  nvt::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(nvt::softmax(x, 2));
}
BENCHMARK(BM_Softmax);

void BM_Inject(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  nvt::Rng rng(4);
  const nvt::Tensor x = random_tensor(rng, {B, 197, 64});
  const auto q = nvt::noise::build_quality_matrix(nvt::noise::QualityKind::cyclic_shift_add(0.5), B);
  nvt::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(nvt::noise::inject(x, q));
}
BENCHMARK(BM_Inject)->Arg(8)->Arg(32);

void BM_LuLogdet(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  nvt::Rng rng(5);
  const nvt::Tensor m = random_tensor(rng, {n, n});
  for (auto _ : state) benchmark::DoNotOptimize(nvt::lu_logdet(m));
}
BENCHMARK(BM_LuLogdet)->Arg(6)->Arg(64)->Arg(256);

}  // namespace
