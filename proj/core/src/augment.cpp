#include "nvt/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nvt/error.hpp"

namespace nvt::data {

namespace {

constexpr std::uint8_t kFill = 128;

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Inverse-mapped nearest-neighbour warp; map(x, y) returns the source point.
template <typename Map>
Image warp(const Image& in, Map&& map) {
  Image out(in.channels, in.height, in.width);
  const double cx = (static_cast<double>(in.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(in.height) - 1.0) / 2.0;
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < in.width; ++x) {
      const auto [sx, sy] = map(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
      const long ix = std::lround(sx + cx);
      const long iy = std::lround(sy + cy);
      const bool inside = ix >= 0 && iy >= 0 && ix < static_cast<long>(in.width) && iy < static_cast<long>(in.height);
      for (std::size_t c = 0; c < in.channels; ++c)
        out.at(c, y, x) = inside ? in.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) : kFill;
    }
  return out;
}

template <typename Fn>
Image map_pixels(const Image& in, Fn&& fn) {
  Image out = in;
  for (auto& p : out.pixels) p = fn(p);
  return out;
}

}  // namespace

void AugmentConfig::validate() const {
  if (magnitude < 0 || magnitude > 30) throw ConfigError("augment magnitude must be in [0, 30]");
}

std::string op_name(AugmentOp op) {
  switch (op) {
    case AugmentOp::Rotate: return "rotate";
    case AugmentOp::ShearX: return "shear_x";
    case AugmentOp::ShearY: return "shear_y";
    case AugmentOp::TranslateX: return "translate_x";
    case AugmentOp::TranslateY: return "translate_y";
    case AugmentOp::Brightness: return "brightness";
    case AugmentOp::Contrast: return "contrast";
    case AugmentOp::Solarize: return "solarize";
    case AugmentOp::Posterize: return "posterize";
  }
  return "unknown";
}

Image apply_op(const Image& image, AugmentOp op, int magnitude, bool negate) {
  const double level = std::clamp(magnitude, 0, 30) / 30.0;
  const double sign = negate ? -1.0 : 1.0;
  switch (op) {
    case AugmentOp::Rotate: {
      const double theta = sign * 30.0 * level * std::numbers::pi / 180.0;
      const double c = std::cos(theta), s = std::sin(theta);
      return warp(image, [&](double x, double y) { return std::pair{c * x + s * y, -s * x + c * y}; });
    }
    case AugmentOp::ShearX: {
      const double k = sign * 0.3 * level;
      return warp(image, [&](double x, double y) { return std::pair{x + k * y, y}; });
    }
    case AugmentOp::ShearY: {
      const double k = sign * 0.3 * level;
      return warp(image, [&](double x, double y) { return std::pair{x, y + k * x}; });
    }
    case AugmentOp::TranslateX: {
      const double t = sign * 0.45 * static_cast<double>(image.width) * level;
      return warp(image, [&](double x, double y) { return std::pair{x - t, y}; });
    }
    case AugmentOp::TranslateY: {
      const double t = sign * 0.45 * static_cast<double>(image.height) * level;
      return warp(image, [&](double x, double y) { return std::pair{x, y - t}; });
    }
    case AugmentOp::Brightness: {
      const double f = 1.0 + sign * 0.9 * level;
      return map_pixels(image, [&](std::uint8_t v) { return clamp_byte(v * f); });
    }
    case AugmentOp::Contrast: {
      const double f = 1.0 + sign * 0.9 * level;
      double mean = 0.0;
      if (image.channels == 3) {
        const std::size_t plane = image.height * image.width;
        for (std::size_t i = 0; i < plane; ++i)
          mean += 0.299 * image.pixels[i] + 0.587 * image.pixels[plane + i] + 0.114 * image.pixels[2 * plane + i];
        mean /= static_cast<double>(plane);
      } else {
        for (auto p : image.pixels) mean += p;
        mean /= static_cast<double>(image.pixels.size());
      }
      return map_pixels(image, [&](std::uint8_t v) { return clamp_byte(mean + f * (v - mean)); });
    }
    case AugmentOp::Solarize: {
      const double threshold = 255.0 * (1.0 - level);
      return map_pixels(image, [&](std::uint8_t v) {
        return static_cast<std::uint8_t>(v >= threshold ? 255 - v : v);
      });
    }
    case AugmentOp::Posterize: {
      const int bits = static_cast<int>(std::lround(8.0 - 4.0 * level));
      const auto mask = static_cast<std::uint8_t>(0xFF << (8 - bits));
      return map_pixels(image, [&](std::uint8_t v) { return static_cast<std::uint8_t>(v & mask); });
    }
  }
  return image;
}

Image rand_augment(const Image& image, const AugmentConfig& config, Rng& rng) {
  config.validate();
  Image out = image;
  for (std::size_t i = 0; i < config.num_ops; ++i) {
    const AugmentOp op = kAugmentOps[uniform_index(rng, kAugmentOps.size())];
    const bool negate = uniform01(rng) < 0.5;
    out = apply_op(out, op, config.magnitude, negate);
  }
  return out;
}

Image random_resized_crop(const Image& image, std::size_t out_size, const CropConfig& crop, Rng& rng) {
  if (out_size == 0) throw ContractError("crop output size must be >= 1");
  const double area = static_cast<double>(image.height * image.width);
  const double log_lo = std::log(crop.ratio.first), log_hi = std::log(crop.ratio.second);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * uniform(rng, crop.scale.first, crop.scale.second);
    const double aspect = std::exp(uniform(rng, log_lo, log_hi));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
    if (w == 0 || h == 0 || w > image.width || h > image.height) continue;
    const std::size_t top = uniform_index(rng, image.height - h + 1);
    const std::size_t left = uniform_index(rng, image.width - w + 1);
    Image region(image.channels, h, w);
    for (std::size_t c = 0; c < image.channels; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) region.at(c, y, x) = image.at(c, top + y, left + x);
    return resize_nearest(region, out_size, out_size);
  }
  const std::size_t side = std::min(image.height, image.width);
  const std::size_t top = (image.height - side) / 2, left = (image.width - side) / 2;
  Image region(image.channels, side, side);
  for (std::size_t c = 0; c < image.channels; ++c)
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) region.at(c, y, x) = image.at(c, top + y, left + x);
  return resize_nearest(region, out_size, out_size);
}

Tensor normalize(const Image& image, const NormStats& stats) {
  stats.validate();
  if (image.channels != 3) throw ShapeError("normalize expects a 3-channel image");
  const std::size_t plane = image.height * image.width;
  std::vector<double> out(image.pixels.size());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i)
      out[c * plane + i] = (image.pixels[c * plane + i] / 255.0 - stats.mean[c]) / stats.std[c];
  return Tensor(Shape{3, image.height, image.width}, std::move(out));
}

std::vector<double> denormalize(const Tensor& normalized, const NormStats& stats) {
  if (normalized.rank() != 3 || normalized.dim(0) != 3) throw ShapeError("denormalize expects [3, H, W]");
  const std::size_t plane = normalized.dim(1) * normalized.dim(2);
  const auto d = normalized.data();
  std::vector<double> out(d.size());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = (d[c * plane + i] * stats.std[c] + stats.mean[c]) * 255.0;
  return out;
}

Tensor eval_preprocess(const Image& image, std::size_t out_size, const NormStats& stats) {
  return normalize(resize_nearest(image, out_size, out_size), stats);
}

Tensor train_preprocess(const Image& image, const TrainTransform& transform, Rng& rng) {
  Image augmented = rand_augment(image, transform.augment, rng);
  Image cropped = random_resized_crop(augmented, transform.out_size, transform.crop, rng);
  return normalize(cropped, transform.stats);
}

std::uint64_t sample_seed(std::uint64_t augment_seed, std::size_t epoch, std::size_t position) {
  return derive_seed(augment_seed, {0x61756700ULL, epoch, position});
}

}  // namespace nvt::data
