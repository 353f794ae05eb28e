#include "nvt/json_io.hpp"

#include <algorithm>
#include <cstring>

#include "nvt/error.hpp"

namespace nvt {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw ConfigError(path + "." + key + ": unknown key");
  }
}

namespace {

template <typename T>
T get_field(const json& j, const char* key, const std::string& path) {
  const std::string where = path + "." + key;
  if (!j.contains(key)) throw ConfigError(where + ": missing required field");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": wrong type");
  }
}

template <typename T>
T get_field_or(const json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  return get_field<T>(j, key, path);
}

std::size_t get_count(const json& j, const char* key, std::size_t fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(path + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

json to_json(const vit::ViTConfig& c) {
  return json{{"image_size", c.image_size}, {"patch_size", c.patch_size}, {"in_channels", c.in_channels},
              {"embed_dim", c.embed_dim},   {"depth", c.depth},           {"num_heads", c.num_heads},
              {"mlp_ratio", c.mlp_ratio},   {"num_classes", c.num_classes}, {"drop_rate", c.drop_rate}};
}

vit::ViTConfig vit_config_from_json(const json& j, const std::string& path) {
  reject_unknown_keys(j,
                      {"image_size", "patch_size", "in_channels", "embed_dim", "depth", "num_heads", "mlp_ratio",
                       "num_classes", "drop_rate"},
                      path);
  vit::ViTConfig c;
  c.image_size = get_count(j, "image_size", c.image_size, path);
  c.patch_size = get_count(j, "patch_size", c.patch_size, path);
  c.in_channels = get_count(j, "in_channels", c.in_channels, path);
  c.embed_dim = get_count(j, "embed_dim", c.embed_dim, path);
  c.depth = get_count(j, "depth", c.depth, path);
  c.num_heads = get_count(j, "num_heads", c.num_heads, path);
  c.mlp_ratio = get_field_or<double>(j, "mlp_ratio", c.mlp_ratio, path);
  c.num_classes = get_count(j, "num_classes", c.num_classes, path);
  c.drop_rate = get_field_or<double>(j, "drop_rate", c.drop_rate, path);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

json to_json(const noise::NoiseConfig& c) {
  json j{{"layer_index", c.layer_index}, {"kind", noise::kind_name(c.quality.kind)}};
  if (c.quality.kind == noise::NoiseKind::CyclicMix || c.quality.kind == noise::NoiseKind::CyclicShiftAdd)
    j["alpha"] = c.quality.alpha;
  if (c.quality.kind == noise::NoiseKind::Custom) j["custom"] = c.quality.custom;
  if (c.selection_seed) j["selection_seed"] = *c.selection_seed;
  return j;
}

noise::NoiseConfig noise_config_from_json(const json& j, std::size_t depth, const std::string& path) {
  reject_unknown_keys(j, {"layer_index", "kind", "alpha", "custom", "selection_seed"}, path);
  noise::QualityKind q;
  try {
    q.kind = noise::parse_kind(get_field<std::string>(j, "kind", path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ".kind: " + e.what());
  }
  const bool cyclic = q.kind == noise::NoiseKind::CyclicMix || q.kind == noise::NoiseKind::CyclicShiftAdd;
  if (cyclic) {
    q.alpha = get_field<double>(j, "alpha", path);  // no default: must be explicit
  } else if (j.contains("alpha")) {
    throw ConfigError(path + ".alpha: only valid for cyclic kinds");
  }
  if (q.kind == noise::NoiseKind::Custom) {
    q.custom = get_field<std::vector<std::vector<double>>>(j, "custom", path);
  } else if (j.contains("custom")) {
    throw ConfigError(path + ".custom: only valid for kind \"custom\"");
  }

  noise::NoiseConfig c;
  std::optional<std::uint64_t> seed;
  if (j.contains("selection_seed")) seed = get_field<std::uint64_t>(j, "selection_seed", path);
  if (j.contains("layer_index")) {
    c = noise::NoiseConfig{get_count(j, "layer_index", 0, path), q, seed};
  } else if (seed) {
    c = noise::random_layer_noise_config(depth, q, *seed);
  } else {
    c = noise::default_noise_config(depth, q);
  }
  try {
    c.validate(depth);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

json to_json(const data::NormStats& s) { return json{{"mean", s.mean}, {"std", s.std}}; }

data::NormStats norm_stats_from_json(const json& j, const std::string& path) {
  reject_unknown_keys(j, {"mean", "std"}, path);
  data::NormStats s;
  s.mean = get_field<std::array<double, 3>>(j, "mean", path);
  s.std = get_field<std::array<double, 3>>(j, "std", path);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return s;
}

json to_json(const data::AugmentConfig& a) {
  return json{{"num_ops", a.num_ops}, {"magnitude", a.magnitude}, {"seed", a.seed}};
}

data::AugmentConfig augment_config_from_json(const json& j, const std::string& path) {
  reject_unknown_keys(j, {"num_ops", "magnitude", "seed"}, path);
  data::AugmentConfig a;
  a.num_ops = get_count(j, "num_ops", a.num_ops, path);
  a.magnitude = get_field_or<int>(j, "magnitude", a.magnitude, path);
  a.seed = get_field_or<std::uint64_t>(j, "seed", a.seed, path);
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return a;
}

}  // namespace nvt
