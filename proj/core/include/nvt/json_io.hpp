#pragma once

// JSON mappings for the configuration types. Conversions validate key sets:
// unknown keys throw ConfigError naming the offending path.

#include <nlohmann/json.hpp>
#include <string>

#include "nvt/augment.hpp"
#include "nvt/dataset.hpp"
#include "nvt/noise.hpp"
#include "nvt/vit.hpp"

namespace nvt {

// Throws ConfigError("<path>.<key>: unknown key") for keys outside `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& path);

nlohmann::json to_json(const vit::ViTConfig& c);
vit::ViTConfig vit_config_from_json(const nlohmann::json& j, const std::string& path = "model");

// {"layer_index", "kind", "alpha"?, "custom"?, "selection_seed"?}
nlohmann::json to_json(const noise::NoiseConfig& c);
// `depth` resolves a missing layer_index: drawn from selection_seed when
// present, otherwise the last layer.
noise::NoiseConfig noise_config_from_json(const nlohmann::json& j, std::size_t depth, const std::string& path = "noise");

nlohmann::json to_json(const data::NormStats& s);
data::NormStats norm_stats_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json to_json(const data::AugmentConfig& a);
data::AugmentConfig augment_config_from_json(const nlohmann::json& j, const std::string& path);

}  // namespace nvt
