#include "nvt/cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include "nvt/error.hpp"
#include "nvt/json_io.hpp"

namespace nvt::cli {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

std::size_t count_field(const json& j, const char* key, std::size_t fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(path + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

std::pair<double, double> range_field(const json& j, const char* key, std::pair<double, double> fallback,
                                      const std::string& path) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(path + "." + key + ": expected [low, high]");
  std::pair<double, double> r{v[0].get<double>(), v[1].get<double>()};
  if (!(r.first > 0.0 && r.first <= r.second)) throw ConfigError(path + "." + key + ": need 0 < low <= high");
  return r;
}

json to_json(const DataSource& s) {
  switch (s.kind) {
    case DataSource::Kind::Folder:
      return json{{"folder", s.path}, {"split", s.split}};
    case DataSource::Kind::Packed:
      return json{{"packed", s.path}};
    case DataSource::Kind::Synth:
      break;
  }
  return json{{"synth",
               {{"classes", s.synth.classes},
                {"per_class", s.synth.per_class},
                {"image_size", s.synth.image_size},
                {"seed", s.synth.seed}}}};
}

DataSource source_from_json(const json& j, const std::string& path, const std::string& default_split) {
  reject_unknown_keys(j, {"folder", "split", "packed", "synth"}, path);
  const int kinds = int(j.contains("folder")) + int(j.contains("packed")) + int(j.contains("synth"));
  if (kinds != 1) throw ConfigError(path + ": expected exactly one of folder, packed, synth");
  DataSource s;
  if (j.contains("split") && !j.contains("folder")) throw ConfigError(path + ".split: only valid with folder");
  if (j.contains("folder")) {
    s.kind = DataSource::Kind::Folder;
    s.path = field<std::string>(j, "folder", "", path);
    s.split = field<std::string>(j, "split", default_split, path);
    if (s.path.empty()) throw ConfigError(path + ".folder: empty path");
    if (s.split.empty()) throw ConfigError(path + ".split: empty split name");
  } else if (j.contains("packed")) {
    s.kind = DataSource::Kind::Packed;
    s.path = field<std::string>(j, "packed", "", path);
    if (s.path.empty()) throw ConfigError(path + ".packed: empty path");
  } else {
    s.kind = DataSource::Kind::Synth;
    const json& sj = j.at("synth");
    const std::string sp = path + ".synth";
    reject_unknown_keys(sj, {"classes", "per_class", "image_size", "seed"}, sp);
    s.synth.classes = count_field(sj, "classes", s.synth.classes, sp);
    s.synth.per_class = count_field(sj, "per_class", s.synth.per_class, sp);
    s.synth.image_size = count_field(sj, "image_size", s.synth.image_size, sp);
    s.synth.seed = field<std::uint64_t>(sj, "seed", s.synth.seed, sp);
    if (s.synth.classes < 1) throw ConfigError(sp + ".classes: must be >= 1");
    if (s.synth.per_class < 1) throw ConfigError(sp + ".per_class: must be >= 1");
    if (s.synth.image_size < 4) throw ConfigError(sp + ".image_size: must be >= 4");
  }
  return s;
}

}  // namespace

json to_json(const train::TrainConfig& c) {
  return json{{"base_lr", c.base_lr},       {"epochs", c.epochs},         {"batch_size", c.batch_size},
              {"smoothing", c.smoothing},   {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
              {"beta2", c.beta2},           {"adam_eps", c.adam_eps},     {"seed", c.seed},
              {"deterministic", c.deterministic}};
}

train::TrainConfig train_config_from_json(const json& j, const std::string& path) {
  reject_unknown_keys(j,
                      {"base_lr", "epochs", "batch_size", "smoothing", "weight_decay", "beta1", "beta2", "adam_eps",
                       "seed", "deterministic"},
                      path);
  train::TrainConfig c;
  if (!j.contains("batch_size")) throw ConfigError(path + ".batch_size: missing required field");
  c.base_lr = field<double>(j, "base_lr", c.base_lr, path);
  c.epochs = count_field(j, "epochs", c.epochs, path);
  c.batch_size = count_field(j, "batch_size", c.batch_size, path);
  c.smoothing = field<double>(j, "smoothing", c.smoothing, path);
  c.weight_decay = field<double>(j, "weight_decay", c.weight_decay, path);
  c.beta1 = field<double>(j, "beta1", c.beta1, path);
  c.beta2 = field<double>(j, "beta2", c.beta2, path);
  c.adam_eps = field<double>(j, "adam_eps", c.adam_eps, path);
  c.seed = field<std::uint64_t>(j, "seed", c.seed, path);
  c.deterministic = field<bool>(j, "deterministic", c.deterministic, path);
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown_keys(j, {"model", "noise", "train", "data", "output"}, "config");
  RunConfig rc;
  if (j.contains("model")) rc.model = vit_config_from_json(j.at("model"), "model");
  if (j.contains("noise") && !j.at("noise").is_null()) rc.noise = noise_config_from_json(j.at("noise"), rc.model.depth, "noise");
  if (!j.contains("train")) throw ConfigError("train: missing required section");
  rc.train = train_config_from_json(j.at("train"), "train");

  if (!j.contains("data")) throw ConfigError("data: missing required section");
  const json& d = j.at("data");
  reject_unknown_keys(d, {"train", "val", "norm_stats", "augment", "crop"}, "data");
  if (!d.contains("train")) throw ConfigError("data.train: missing required field");
  if (!d.contains("val")) throw ConfigError("data.val: missing required field");
  rc.data.train = source_from_json(d.at("train"), "data.train", "train");
  rc.data.val = source_from_json(d.at("val"), "data.val", "val");
  if (d.contains("norm_stats")) {
    const json& ns = d.at("norm_stats");
    if (ns.is_string()) {
      if (ns.get<std::string>() != "compute") throw ConfigError("data.norm_stats: expected \"compute\" or {mean, std}");
    } else {
      rc.data.norm_stats = norm_stats_from_json(ns, "data.norm_stats");
    }
  }
  if (d.contains("augment")) rc.data.augment = augment_config_from_json(d.at("augment"), "data.augment");
  if (d.contains("crop")) {
    const json& c = d.at("crop");
    reject_unknown_keys(c, {"scale", "ratio"}, "data.crop");
    rc.data.crop.scale = range_field(c, "scale", rc.data.crop.scale, "data.crop");
    rc.data.crop.ratio = range_field(c, "ratio", rc.data.crop.ratio, "data.crop");
    if (rc.data.crop.scale.second > 1.0) throw ConfigError("data.crop.scale: high must be <= 1");
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    reject_unknown_keys(o, {"log_dir", "checkpoint_dir"}, "output");
    rc.output.log_dir = field<std::string>(o, "log_dir", rc.output.log_dir, "output");
    rc.output.checkpoint_dir = field<std::string>(o, "checkpoint_dir", rc.output.checkpoint_dir, "output");
  }

  if (rc.noise && rc.noise->quality.kind == noise::NoiseKind::Custom &&
      rc.noise->quality.custom.size() != rc.train.batch_size)
    throw ConfigError("noise.custom: matrix size " + std::to_string(rc.noise->quality.custom.size()) +
                      " differs from train.batch_size " + std::to_string(rc.train.batch_size));
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config: cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config: invalid JSON in '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j);
}

json to_json(const RunConfig& rc) {
  json j;
  j["model"] = nvt::to_json(rc.model);
  j["noise"] = rc.noise ? nvt::to_json(*rc.noise) : json(nullptr);
  j["train"] = to_json(rc.train);
  json d;
  d["train"] = to_json(rc.data.train);
  d["val"] = to_json(rc.data.val);
  d["norm_stats"] = rc.data.norm_stats ? nvt::to_json(*rc.data.norm_stats) : json("compute");
  d["augment"] = nvt::to_json(rc.data.augment);
  d["crop"] = json{{"scale", {rc.data.crop.scale.first, rc.data.crop.scale.second}},
                   {"ratio", {rc.data.crop.ratio.first, rc.data.crop.ratio.second}}};
  j["data"] = std::move(d);
  j["output"] = json{{"log_dir", rc.output.log_dir}, {"checkpoint_dir", rc.output.checkpoint_dir}};
  return j;
}

void check_data_paths(const DataSource& s, const std::string& field_path) {
  namespace fs = std::filesystem;
  switch (s.kind) {
    case DataSource::Kind::Folder:
      if (!fs::is_directory(s.path)) throw ConfigError(field_path + ".folder: '" + s.path + "' is not a directory");
      if (!fs::is_directory(fs::path(s.path) / s.split))
        throw ConfigError(field_path + ".split: '" + (fs::path(s.path) / s.split).string() + "' is not a directory");
      break;
    case DataSource::Kind::Packed:
      if (!fs::is_regular_file(s.path)) throw ConfigError(field_path + ".packed: '" + s.path + "' does not exist");
      break;
    case DataSource::Kind::Synth:
      break;
  }
}

data::Dataset load_source(const DataSource& s) {
  switch (s.kind) {
    case DataSource::Kind::Folder:
      return data::load_manifest(data::scan_image_folder(s.path, s.split));
    case DataSource::Kind::Packed:
      return data::load_packed_dataset(s.path);
    case DataSource::Kind::Synth:
      break;
  }
  return data::synth_dataset(s.synth.classes, s.synth.per_class, s.synth.image_size, s.synth.seed);
}

}  // namespace nvt::cli
