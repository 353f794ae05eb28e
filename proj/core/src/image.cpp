#include "nvt/image.hpp"

#include <cctype>
#include <string>

#include "nvt/container.hpp"
#include "nvt/error.hpp"

namespace nvt::data {

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(std::span<const std::uint8_t> bytes) : b_(bytes) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t token_start() {
    skip_space_and_comments();
    return pos_;
  }

  std::uint64_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > (1u << 30)) throw FormatError(std::string("PPM ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PPM header: expected ") + what, start);
    return v;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("not a PPM file (bad magic)", 0);
  if (bytes[1] != '6') {
    throw FormatError(std::string("unsupported PPM variant 'P") + static_cast<char>(bytes[1]) +
                          "' (only binary P6 is supported)",
                      1);
  }
  HeaderParser p(bytes.subspan(2));
  const auto width = p.number("width");
  const auto height = p.number("height");
  const std::size_t maxval_at = 2 + p.token_start();
  const auto maxval = p.number("maxval");
  if (maxval != 255) throw FormatError("PPM maxval " + std::to_string(maxval) + " unsupported (need 255)", maxval_at);
  std::size_t pos = 2 + p.pos();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("PPM header: missing separator", pos);
  ++pos;
  if (width == 0 || height == 0) throw FormatError("PPM has zero extent", pos);
  const std::size_t n = static_cast<std::size_t>(width * height * 3);
  if (bytes.size() - pos < n)
    throw FormatError("truncated PPM payload: need " + std::to_string(n) + " bytes, have " +
                          std::to_string(bytes.size() - pos),
                      bytes.size());

  Image img(3, height, width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = bytes[pos + (y * width + x) * 3 + c];
  return img;
}

Image load_ppm(const std::filesystem::path& path) { return decode_ppm(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  if (image.channels != 3) throw ContractError("PPM output needs 3 channels");
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels.size());
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.push_back(image.at(c, y, x));
  return out;
}

void save_ppm(const std::filesystem::path& path, const Image& image) { write_file_bytes(path, encode_ppm(image)); }

Image resize_nearest(const Image& image, std::size_t out_height, std::size_t out_width) {
  if (out_height == 0 || out_width == 0) throw ContractError("resize target must be >= 1");
  if (out_height == image.height && out_width == image.width) return image;
  Image out(image.channels, out_height, out_width);
  std::vector<std::size_t> sy(out_height), sx(out_width);
  for (std::size_t y = 0; y < out_height; ++y) sy[y] = ((2 * y + 1) * image.height) / (2 * out_height);
  for (std::size_t x = 0; x < out_width; ++x) sx[x] = ((2 * x + 1) * image.width) / (2 * out_width);
  for (std::size_t c = 0; c < image.channels; ++c)
    for (std::size_t y = 0; y < out_height; ++y)
      for (std::size_t x = 0; x < out_width; ++x) out.at(c, y, x) = image.at(c, sy[y], sx[x]);
  return out;
}

}  // namespace nvt::data
