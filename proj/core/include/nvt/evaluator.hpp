#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvt/dataset.hpp"
#include "nvt/noise.hpp"
#include "nvt/tensor.hpp"
#include "nvt/vit.hpp"

namespace nvt::eval {

// A model as used for inference: geometry, weights, and the fixed noise setup.
struct Model {
  vit::ViTConfig config;
  vit::ModelParams params;
  std::optional<noise::NoiseConfig> noise;
};

// Fraction of rows whose label is among the k largest logits. A class outranks
// the label when its logit is larger, or equal with a lower index. k is
// clamped to the class count.
double topk_accuracy(const Tensor& logits, std::span<const std::size_t> labels, std::size_t k);

// How the evaluation batches were formed. With noise active the quality matrix
// couples the samples of one batch, so results depend on this.
struct BatchComposition {
  std::size_t batch_size = 0;
  std::size_t batch_count = 0;
  std::size_t last_batch_size = 0;
  std::string noise_kind = "none";
  // Factor applied to a lone sample (c0 + c1) by cyclic kinds.
  std::optional<double> single_sample_scale;
};

struct MetricsReport {
  double top1 = 0.0;
  double top5 = 0.0;
  std::size_t top5_k = 5;  // effective k after clamping
  std::vector<double> per_class_top1;
  std::vector<std::size_t> per_class_count;
  std::size_t sample_count = 0;
  std::optional<double> latency_ms_per_image;
  std::optional<std::uint64_t> params;
  BatchComposition batches;
};

std::string to_json_string(const MetricsReport& report, int indent = -1);
// class,count,top1 rows.
std::string per_class_csv(const MetricsReport& report, const std::vector<std::string>& class_names);

struct EvalOptions {
  std::size_t out_size = 0;  // 0 = model image_size
  data::NormStats stats;
  std::size_t batch_size = 1;
};

// Logits [N, C] for the dataset in order, eval_preprocess on every image, the
// model's noise realized per actual batch size.
Tensor predict_logits(const Model& model, const data::Dataset& dataset, const EvalOptions& options);

// `logits_out`, when given, receives the [N, C] logits the report was built from.
MetricsReport evaluate(const Model& model, const data::Dataset& dataset, const EvalOptions& options,
                       Tensor* logits_out = nullptr);
MetricsReport report_from_logits(const Tensor& logits, std::span<const std::size_t> labels, std::size_t num_classes);

struct LatencyResult {
  std::size_t resolution = 0;
  std::uint64_t params = 0;
  double median_ms = 0.0;
  std::size_t iterations = 0;
  std::size_t warmup = 0;
  std::string environment;
};

// Median wall-clock time of a single-image forward pass at `resolution`
// (positional table resampled when it differs from the model), after warmup.
LatencyResult latency_bench(const Model& model, std::size_t resolution, std::size_t iterations, std::size_t warmup);

std::string environment_string();

}  // namespace nvt::eval
