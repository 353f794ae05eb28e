#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvt/augment.hpp"
#include "nvt/dataset.hpp"
#include "nvt/evaluator.hpp"
#include "nvt/noise.hpp"
#include "nvt/tensor.hpp"
#include "nvt/vit.hpp"

namespace nvt::train {

struct TrainConfig {
  double base_lr = 1e-5;
  std::size_t epochs = 30;
  std::size_t batch_size = 0;  // required
  double smoothing = 0.1;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool deterministic = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// base_lr * (1 + cos(pi * step / total_steps)) / 2; no warmup.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr);

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

// One AdamW update with decoupled weight decay: theta *= (1 - lr * lambda),
// then theta -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
// Moments are created on the first call.
void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, OptimizerState& state, double lr,
                const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_top1 = 0.0;
  double val_top5 = 0.0;
  double lr = 0.0;  // rate of the epoch's first step

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; earliest maximum of val_top1
};

std::string to_json_line(const EpochRecord& record);

struct TrainOptions {
  data::AugmentConfig augment;
  data::CropConfig crop;
  data::NormStats stats;
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<std::filesystem::path> history_path;
  std::ostream* log = nullptr;
};

struct TrainResult {
  vit::ModelParams best_params;
  TrainHistory history;
};

// Smoothed-label entropy: the infimum of label_smoothing_ce over all logits.
double smoothing_entropy_floor(double epsilon, std::size_t num_classes);

// Fine-tunes `initial` on `train_set`, validating on `val_set` after every
// epoch. The checkpoint is rewritten whenever val Top-1 improves, so on return
// it holds the best_epoch weights. `noise` is applied on every forward pass.
TrainResult train(const vit::ViTConfig& config, const vit::ModelParams& initial,
                  const std::optional<noise::NoiseConfig>& noise, const data::Dataset& train_set,
                  const data::Dataset& val_set, const TrainConfig& cfg, const TrainOptions& options);

// Per-epoch shuffle order, derived from (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

// Batch of train_preprocess outputs for the given sample indices.
Tensor make_train_batch(const data::Dataset& dataset, std::span<const std::size_t> indices,
                        const data::TrainTransform& transform, std::size_t epoch, std::size_t first_position);

}  // namespace nvt::train
