#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nvt/noise.hpp"
#include "nvt/tensor.hpp"

namespace nvt::vit {

struct ViTConfig {
  std::size_t image_size = 224;
  std::size_t patch_size = 16;
  std::size_t in_channels = 3;
  std::size_t embed_dim = 768;
  std::size_t depth = 12;
  std::size_t num_heads = 12;
  double mlp_ratio = 4.0;
  std::size_t num_classes = 1000;
  double drop_rate = 0.0;

  // ViT-B/16 geometry at the given resolution.
  static ViTConfig base16(std::size_t image_size, std::size_t num_classes);

  void validate() const;
  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t seq_len() const { return 1 + num_patches(); }
  std::size_t patch_dim() const { return in_channels * patch_size * patch_size; }
  std::size_t mlp_hidden() const;
  std::size_t head_dim() const { return embed_dim / num_heads; }

  bool operator==(const ViTConfig&) const = default;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct Norm {
  Tensor weight;  // [D]
  Tensor bias;    // [D]
};

struct EncoderBlock {
  Norm norm1;
  Linear qkv;
  Linear proj;
  Norm norm2;
  Linear fc1;
  Linear fc2;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ModelParams {
  Linear patch_embed;
  Tensor cls_token;  // [D]
  Tensor pos_embed;  // [1 + num_patches, D]
  std::vector<EncoderBlock> blocks;
  Norm norm;
  Linear head;

  // Every learnable tensor in a fixed order. Handles share storage with the
  // params, so writing through them updates the model.
  std::vector<NamedTensor> named() const;
  ModelParams clone() const;
  void set_requires_grad(bool on);
  void zero_grad();
};

// Expected shape of every parameter, in named() order.
std::vector<std::pair<std::string, Shape>> param_shapes(const ViTConfig& config);

// Truncated-normal(0.02) weights and positional table, zero biases, zero CLS,
// unit LayerNorm scales. Deterministic per seed.
ModelParams init_params(const ViTConfig& config, std::uint64_t seed);

// Closed-form learnable scalar count.
std::uint64_t param_count(const ViTConfig& config);

// Throws ShapeError unless every tensor matches param_shapes(config).
void check_params(const ModelParams& params, const ViTConfig& config);

enum class Mode { Train, Eval };

struct ForwardTrace {
  std::vector<Shape> layer_inputs;  // [B, T, D] seen by each encoder layer
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  std::uint64_t seed = 0;  // dropout stream
  ForwardTrace* trace = nullptr;
};

// Pre-norm ViT: logits [B, num_classes] from the final-norm CLS token. When
// `noise` is set, its quality matrix is realized for this batch and applied to
// the output of encoder layer noise->layer_index, in both modes.
Tensor forward(const ModelParams& params, const ViTConfig& config, const Tensor& batch,
               const std::optional<noise::NoiseConfig>& noise, const ForwardOptions& options = {});

// Bilinear (align-corners) resampling of the patch rows of a positional table
// from old_grid^2 to new_grid^2 positions; the CLS row is copied.
Tensor resize_pos_embed(const Tensor& table, std::size_t old_grid, std::size_t new_grid);

// Parameters for a different image_size: pos_embed resampled, the rest shared.
ModelParams adapt_resolution(const ModelParams& params, const ViTConfig& from, std::size_t image_size);

}  // namespace nvt::vit
