#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace nvt::data {

// 8-bit channel-first image, pixels laid out [C, H, W].
struct Image {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  std::uint8_t& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  std::uint8_t at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }

  bool operator==(const Image&) const = default;
};

// Binary "P6" PPM with maxval 255. Errors carry the byte offset.
Image decode_ppm(std::span<const std::uint8_t> bytes);
Image load_ppm(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ppm(const Image& image);
void save_ppm(const std::filesystem::path& path, const Image& image);

// Nearest-neighbour resize; source index = floor((dst + 0.5) * in / out).
Image resize_nearest(const Image& image, std::size_t out_height, std::size_t out_width);

}  // namespace nvt::data
