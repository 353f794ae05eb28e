#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>

#include "nvt/dataset.hpp"
#include "nvt/image.hpp"
#include "nvt/rng.hpp"
#include "nvt/tensor.hpp"

namespace nvt::data {

// RandAugment policy. Interpolation is always nearest-neighbour.
struct AugmentConfig {
  std::size_t num_ops = 2;
  int magnitude = 9;  // 0..30
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

enum class AugmentOp { Rotate, ShearX, ShearY, TranslateX, TranslateY, Brightness, Contrast, Solarize, Posterize };

inline constexpr std::array<AugmentOp, 9> kAugmentOps = {
    AugmentOp::Rotate,     AugmentOp::ShearX,     AugmentOp::ShearY,   AugmentOp::TranslateX, AugmentOp::TranslateY,
    AugmentOp::Brightness, AugmentOp::Contrast,   AugmentOp::Solarize, AugmentOp::Posterize};

std::string op_name(AugmentOp op);

// Magnitude table, level = magnitude / 30:
//   rotate       +-30 deg * level
//   shear        +-0.3 * level
//   translate    +-0.45 * extent * level
//   brightness   factor 1 +- 0.9 * level
//   contrast     factor 1 +- 0.9 * level
//   solarize     invert pixels >= 255 * (1 - level)
//   posterize    keep round(8 - 4 * level) bits
// `negate` picks the sign for the symmetric ops. Geometric ops sample
// nearest-neighbour and fill out-of-bounds pixels with 128.
Image apply_op(const Image& image, AugmentOp op, int magnitude, bool negate);

// num_ops ops drawn uniformly with replacement, applied in sequence.
Image rand_augment(const Image& image, const AugmentConfig& config, Rng& rng);

struct CropConfig {
  std::pair<double, double> scale{0.7, 1.0};
  std::pair<double, double> ratio{3.0 / 4.0, 4.0 / 3.0};
  bool operator==(const CropConfig&) const = default;
};

// Area fraction from `scale`, log-uniform aspect from `ratio`, up to 10
// attempts; falls back to the centred largest square. The crop is then
// nearest-resized to out_size x out_size.
Image random_resized_crop(const Image& image, std::size_t out_size, const CropConfig& crop, Rng& rng);

// (intensity / 255 - mean_c) / std_c as a float64 [C, H, W] tensor.
Tensor normalize(const Image& image, const NormStats& stats);
// Inverse of normalize, back to the 0..255 intensity scale (unrounded).
std::vector<double> denormalize(const Tensor& normalized, const NormStats& stats);

// Validation / test path: nearest resize then normalize; no randomness.
Tensor eval_preprocess(const Image& image, std::size_t out_size, const NormStats& stats);

struct TrainTransform {
  AugmentConfig augment;
  CropConfig crop;
  std::size_t out_size = 224;
  NormStats stats;
};

// Training path: rand_augment -> random_resized_crop -> normalize, all drawing
// from `rng` in that order.
Tensor train_preprocess(const Image& image, const TrainTransform& transform, Rng& rng);

// Seed of the augmentation stream for one sample slot of one epoch.
std::uint64_t sample_seed(std::uint64_t augment_seed, std::size_t epoch, std::size_t position);

}  // namespace nvt::data
