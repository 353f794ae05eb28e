#include "nvt/checkpoint.hpp"

#include <map>

#include "nvt/container.hpp"
#include "nvt/error.hpp"
#include "nvt/json_io.hpp"

namespace nvt::vit {

using nlohmann::json;

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const ViTConfig& config,
                                            const std::optional<noise::NoiseConfig>& noise, const CheckpointMeta& meta) {
  check_params(params, config);
  json m;
  m["format"] = "nvt-checkpoint";
  m["config"] = to_json(config);
  if (noise) m["noise"] = to_json(*noise);
  m["best_val_top1"] = meta.best_val_top1;
  m["epoch"] = meta.epoch;
  m["class_names"] = meta.class_names;
  if (meta.norm_stats) m["norm_stats"] = to_json(*meta.norm_stats);
  if (meta.eval_batch_size) m["eval_batch_size"] = *meta.eval_batch_size;

  std::vector<PackedTensor> entries;
  entries.push_back(PackedTensor::from_text("__meta__", m.dump()));
  for (const auto& nt : params.named()) entries.push_back(PackedTensor::from_tensor(nt.name, nt.tensor, DType::F64));
  return encode_packed(entries);
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ViTConfig& config,
                     const std::optional<noise::NoiseConfig>& noise, const CheckpointMeta& meta) {
  write_file_bytes(path, encode_checkpoint(params, config, noise, meta));
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  auto entries = decode_packed(bytes);
  std::map<std::string, const PackedTensor*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  auto meta_it = by_name.find("__meta__");
  if (meta_it == by_name.end()) throw FormatError("checkpoint has no __meta__ entry", 0);

  Checkpoint ck;
  try {
    const json m = json::parse(meta_it->second->to_text());
    if (m.value("format", "") != "nvt-checkpoint") throw FormatError("container is not a checkpoint", 0);
    ck.config = vit_config_from_json(m.at("config"), "__meta__.config");
    if (m.contains("noise") && !m.at("noise").is_null())
      ck.noise = noise_config_from_json(m.at("noise"), ck.config.depth, "__meta__.noise");
    ck.meta.best_val_top1 = m.at("best_val_top1").get<double>();
    ck.meta.epoch = m.at("epoch").get<std::size_t>();
    ck.meta.class_names = m.at("class_names").get<std::vector<std::string>>();
    if (m.contains("norm_stats")) ck.meta.norm_stats = norm_stats_from_json(m.at("norm_stats"), "__meta__.norm_stats");
    if (m.contains("eval_batch_size")) ck.meta.eval_batch_size = m.at("eval_batch_size").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what(), 0);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what(), 0);
  }

  auto fetch = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing tensor '" + name + "'", 0);
    return it->second->to_tensor();
  };
  ModelParams& p = ck.params;
  p.patch_embed = {fetch("patch_embed.weight"), fetch("patch_embed.bias")};
  p.cls_token = fetch("cls_token");
  p.pos_embed = fetch("pos_embed");
  for (std::size_t l = 0; l < ck.config.depth; ++l) {
    const std::string pre = "blocks." + std::to_string(l) + ".";
    EncoderBlock b;
    b.norm1 = {fetch(pre + "norm1.weight"), fetch(pre + "norm1.bias")};
    b.qkv = {fetch(pre + "attn.qkv.weight"), fetch(pre + "attn.qkv.bias")};
    b.proj = {fetch(pre + "attn.proj.weight"), fetch(pre + "attn.proj.bias")};
    b.norm2 = {fetch(pre + "norm2.weight"), fetch(pre + "norm2.bias")};
    b.fc1 = {fetch(pre + "mlp.fc1.weight"), fetch(pre + "mlp.fc1.bias")};
    b.fc2 = {fetch(pre + "mlp.fc2.weight"), fetch(pre + "mlp.fc2.bias")};
    p.blocks.push_back(std::move(b));
  }
  p.norm = {fetch("norm.weight"), fetch("norm.bias")};
  p.head = {fetch("head.weight"), fetch("head.bias")};
  try {
    check_params(p, ck.config);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint tensors disagree with config: ") + e.what(), 0);
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace nvt::vit
