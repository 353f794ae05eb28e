#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nvt/dataset.hpp"
#include "nvt/noise.hpp"
#include "nvt/vit.hpp"

namespace nvt::vit {

struct CheckpointMeta {
  double best_val_top1 = 0.0;
  std::size_t epoch = 0;
  std::vector<std::string> class_names;
  std::optional<data::NormStats> norm_stats;
  std::optional<std::size_t> eval_batch_size;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  ViTConfig config;
  ModelParams params;
  std::optional<noise::NoiseConfig> noise;  // absent section means no noise
  CheckpointMeta meta;
};

// Parameters as float64 "NVT1" entries plus a "__meta__" JSON entry holding
// config, noise, and the metadata fields. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ViTConfig& config,
                     const std::optional<noise::NoiseConfig>& noise, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const ViTConfig& config,
                                            const std::optional<noise::NoiseConfig>& noise, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace nvt::vit
