#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "nvt/augment.hpp"
#include "nvt/dataset.hpp"
#include "nvt/noise.hpp"
#include "nvt/trainer.hpp"
#include "nvt/vit.hpp"

namespace nvt::cli {

struct SynthOptions {
  std::size_t classes = 8;
  std::size_t per_class = 64;
  std::size_t image_size = 32;
  std::uint64_t seed = 0;
  bool operator==(const SynthOptions&) const = default;
};

// Exactly one of: an image folder split, a packed dataset, a synthetic set.
struct DataSource {
  enum class Kind { Folder, Packed, Synth };
  Kind kind = Kind::Synth;
  std::string path;   // folder root or packed file
  std::string split;  // folder only
  SynthOptions synth;
  bool operator==(const DataSource&) const = default;
};

struct DataConfig {
  DataSource train;
  DataSource val;
  std::optional<data::NormStats> norm_stats;  // none = computed from the training set
  data::AugmentConfig augment;
  data::CropConfig crop;
  bool operator==(const DataConfig&) const = default;
};

struct OutputConfig {
  std::string log_dir = "runs";
  std::string checkpoint_dir = "runs";
  bool operator==(const OutputConfig&) const = default;

  std::filesystem::path history_path() const { return std::filesystem::path(log_dir) / "history.jsonl"; }
  std::filesystem::path checkpoint_path() const { return std::filesystem::path(checkpoint_dir) / "best.nvt"; }
};

struct RunConfig {
  vit::ViTConfig model;
  std::optional<noise::NoiseConfig> noise;
  train::TrainConfig train;
  DataConfig data;
  OutputConfig output;
  bool operator==(const RunConfig&) const = default;
};

// Parses and validates; unknown keys and bad values throw ConfigError naming
// the field path (e.g. "train.batch_size").
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

nlohmann::json to_json(const train::TrainConfig& config);
train::TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path = "train");

// Throws ConfigError naming the field when a referenced file or folder is absent.
void check_data_paths(const DataSource& source, const std::string& field);
data::Dataset load_source(const DataSource& source);

}  // namespace nvt::cli
