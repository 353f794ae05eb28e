#include "nvt/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "nvt/augment.hpp"
#include "nvt/error.hpp"

namespace nvt::eval {

double topk_accuracy(const Tensor& logits, std::span<const std::size_t> labels, std::size_t k) {
  if (logits.rank() != 2) throw ShapeError("topk_accuracy expects [B, C] logits, got " + shape_str(logits.shape()));
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  if (B == 0 || labels.size() != B) throw ShapeError("label count does not match logits batch");
  if (k == 0) throw ContractError("k must be >= 1");
  k = std::min(k, C);
  const auto z = logits.data();
  std::size_t hits = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t y = labels[b];
    if (y >= C) throw IndexError("label " + std::to_string(y) + " out of range for " + std::to_string(C) + " classes");
    const double* row = z.data() + b * C;
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < C; ++c)
      if (row[c] > row[y] || (row[c] == row[y] && c < y)) ++ahead;
    if (ahead < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(B);
}

MetricsReport report_from_logits(const Tensor& logits, std::span<const std::size_t> labels, std::size_t num_classes) {
  MetricsReport r;
  r.sample_count = labels.size();
  r.top1 = topk_accuracy(logits, labels, 1);
  r.top5_k = std::min<std::size_t>(5, logits.dim(1));
  r.top5 = topk_accuracy(logits, labels, 5);
  r.per_class_top1.assign(num_classes, 0.0);
  r.per_class_count.assign(num_classes, 0);
  std::vector<std::size_t> correct(num_classes, 0);
  const std::size_t C = logits.dim(1);
  const auto z = logits.data();
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const std::size_t y = labels[b];
    if (y >= num_classes) throw IndexError("label out of range for per-class report");
    ++r.per_class_count[y];
    const double* row = z.data() + b * C;
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < C; ++c)
      if (row[c] > row[y] || (row[c] == row[y] && c < y)) ++ahead;
    if (ahead == 0) ++correct[y];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    r.per_class_top1[c] = r.per_class_count[c] ? static_cast<double>(correct[c]) / r.per_class_count[c] : 0.0;
  return r;
}

Tensor predict_logits(const Model& model, const data::Dataset& dataset, const EvalOptions& options) {
  if (dataset.samples.empty()) throw ContractError("cannot evaluate an empty dataset");
  if (options.batch_size == 0) throw ContractError("evaluation batch size must be >= 1");
  const std::size_t S = options.out_size ? options.out_size : model.config.image_size;
  if (S != model.config.image_size)
    throw ShapeError("evaluation size " + std::to_string(S) + " does not match model image_size " +
                     std::to_string(model.config.image_size));
  const std::size_t N = dataset.size(), C = model.config.num_classes;
  NoGradGuard no_grad;
  std::vector<double> out(N * C);
  for (std::size_t start = 0; start < N; start += options.batch_size) {
    const std::size_t b = std::min(options.batch_size, N - start);
    const std::size_t item = 3 * S * S;
    std::vector<double> pixels(b * item);
    for (std::size_t i = 0; i < b; ++i) {
      Tensor x = data::eval_preprocess(dataset.samples[start + i].image, S, options.stats);
      std::copy(x.data().begin(), x.data().end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * item));
    }
    Tensor batch(Shape{b, 3, S, S}, std::move(pixels));
    Tensor logits = vit::forward(model.params, model.config, batch, model.noise, {vit::Mode::Eval});
    std::copy(logits.data().begin(), logits.data().end(), out.begin() + static_cast<std::ptrdiff_t>(start * C));
  }
  return Tensor(Shape{N, C}, std::move(out));
}

MetricsReport evaluate(const Model& model, const data::Dataset& dataset, const EvalOptions& options,
                       Tensor* logits_out) {
  const Tensor logits = predict_logits(model, dataset, options);
  const auto labels = dataset.labels();
  MetricsReport r = report_from_logits(logits, labels, std::max(dataset.num_classes(), model.config.num_classes));
  r.params = vit::param_count(model.config);
  const std::size_t N = dataset.size();
  r.batches.batch_size = options.batch_size;
  r.batches.batch_count = (N + options.batch_size - 1) / options.batch_size;
  r.batches.last_batch_size = N - (r.batches.batch_count - 1) * options.batch_size;
  if (model.noise) {
    r.batches.noise_kind = noise::kind_name(model.noise->quality.kind);
    if (auto coeff = model.noise->quality.circulant_coefficients()) r.batches.single_sample_scale = coeff->first + coeff->second;
  }
  if (logits_out) *logits_out = logits;
  return r;
}

std::string to_json_string(const MetricsReport& r, int indent) {
  nlohmann::json j;
  j["top1"] = r.top1;
  j["top5"] = r.top5;
  j["top5_k"] = r.top5_k;
  j["sample_count"] = r.sample_count;
  j["per_class_top1"] = r.per_class_top1;
  j["per_class_count"] = r.per_class_count;
  if (r.latency_ms_per_image) j["latency_ms_per_image"] = *r.latency_ms_per_image;
  if (r.params) j["params"] = *r.params;
  nlohmann::json b{{"batch_size", r.batches.batch_size},
                   {"batch_count", r.batches.batch_count},
                   {"last_batch_size", r.batches.last_batch_size},
                   {"noise_kind", r.batches.noise_kind}};
  if (r.batches.single_sample_scale) b["single_sample_scale"] = *r.batches.single_sample_scale;
  j["batches"] = std::move(b);
  return j.dump(indent);
}

std::string per_class_csv(const MetricsReport& r, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os.precision(17);
  os << "class,count,top1\n";
  for (std::size_t c = 0; c < r.per_class_top1.size(); ++c)
    os << (c < class_names.size() ? class_names[c] : std::to_string(c)) << ',' << r.per_class_count[c] << ','
       << r.per_class_top1[c] << '\n';
  return os.str();
}

std::string environment_string() {
  std::ostringstream os;
#if defined(__clang__)
  os << "clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  os << "gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#else
  os << "unknown-compiler";
#endif
#if defined(__linux__)
  os << ", linux";
#elif defined(__APPLE__)
  os << ", macos";
#elif defined(_WIN32)
  os << ", windows";
#endif
  os << ", hardware_threads=" << std::thread::hardware_concurrency() << ", float64";
  return os.str();
}

LatencyResult latency_bench(const Model& model, std::size_t resolution, std::size_t iterations, std::size_t warmup) {
  if (iterations < 10) throw ContractError("latency_bench needs at least 10 iterations");
  if (warmup < 1) throw ContractError("latency_bench needs at least 1 warmup pass");
  vit::ViTConfig cfg = model.config;
  cfg.image_size = resolution;
  cfg.validate();
  const vit::ModelParams params =
      resolution == model.config.image_size ? model.params : vit::adapt_resolution(model.params, model.config, resolution);

  Rng rng(derive_seed(resolution, {0x62656e6368ULL}));
  Tensor image(Shape{1, cfg.in_channels, resolution, resolution});
  for (double& v : image.mutable_data()) v = standard_normal(rng);

  NoGradGuard no_grad;
  for (std::size_t i = 0; i < warmup; ++i) (void)vit::forward(params, cfg, image, model.noise, {vit::Mode::Eval});
  std::vector<double> ms;
  ms.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Tensor logits = vit::forward(params, cfg, image, model.noise, {vit::Mode::Eval});
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  const double median = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  return LatencyResult{resolution, vit::param_count(cfg), median, iterations, warmup, environment_string()};
}

}  // namespace nvt::eval
