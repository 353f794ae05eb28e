#include "nvt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numbers>

#include "nvt/container.hpp"
#include "nvt/error.hpp"
#include "nvt/rng.hpp"

namespace fs = std::filesystem;

namespace nvt::data {

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

DatasetManifest scan_image_folder(const fs::path& root, const std::string& split) {
  const fs::path dir = split.empty() ? root : root / split;
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory '" + dir.string() + "' does not exist");

  DatasetManifest m;
  m.split = split;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) m.class_names.push_back(entry.path().filename().string());
  std::sort(m.class_names.begin(), m.class_names.end());
  if (m.class_names.empty()) throw DatasetError("no class folders under '" + dir.string() + "'");

  for (std::size_t label = 0; label < m.class_names.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir / m.class_names[label]))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::size_t readable = 0;
    for (const auto& f : files) {
      try {
        (void)load_ppm(f);
      } catch (const Error& e) {
        ++m.skipped;
        std::cerr << "warning: skipping " << f.string() << ": " << e.what() << '\n';
        continue;
      }
      m.entries.push_back({f, label});
      ++readable;
    }
    if (readable == 0) throw DatasetError("class '" + m.class_names[label] + "' has no readable images");
  }
  return m;
}

Dataset load_manifest(const DatasetManifest& manifest) {
  Dataset d;
  d.class_names = manifest.class_names;
  d.samples.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) d.samples.push_back({load_ppm(e.path), e.label, e.path.string()});
  return d;
}

Dataset synth_dataset(std::size_t num_classes, std::size_t per_class, std::size_t image_size, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("synth_dataset needs at least 2 classes");
  if (per_class == 0 || image_size == 0) throw ConfigError("synth_dataset needs per_class and image_size >= 1");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double S = static_cast<double>(image_size);

  Dataset d;
  for (std::size_t c = 0; c < num_classes; ++c) d.class_names.push_back("class_" + std::to_string(c));
  d.samples.reserve(num_classes * per_class);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t family = c % 4;
    const double cycles = 2.0 * static_cast<double>(c / 4 + 1);
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(seed, {0x73796e74ULL, c, i}));
      const double f = cycles * uniform(rng, 0.9, 1.1);
      const double phase_x = uniform(rng, 0.0, two_pi);
      const double phase_y = uniform(rng, 0.0, two_pi);
      const double cx = S / 2 + uniform(rng, -S / 8, S / 8);
      const double cy = S / 2 + uniform(rng, -S / 8, S / 8);
      const double amp = uniform(rng, 50.0, 110.0);
      const double base = 128.0 + uniform(rng, -20.0, 20.0);
      std::array<double, 3> gain{};
      for (double& g : gain) g = uniform(rng, 0.5, 1.0);

      Image img(3, image_size, image_size);
      for (std::size_t y = 0; y < image_size; ++y)
        for (std::size_t x = 0; x < image_size; ++x) {
          const double u = (static_cast<double>(x) + 0.5) / S;
          const double v = (static_cast<double>(y) + 0.5) / S;
          double wave = 0.0;
          switch (family) {
            case 0: wave = std::sin(two_pi * f * u + phase_x); break;
            case 1: wave = std::sin(two_pi * f * v + phase_y); break;
            case 2: wave = std::sin(two_pi * f * u + phase_x) * std::sin(two_pi * f * v + phase_y); break;
            default: {
              const double r = std::hypot(static_cast<double>(x) + 0.5 - cx, static_cast<double>(y) + 0.5 - cy) / S;
              wave = std::sin(two_pi * f * r + phase_x);
            }
          }
          for (std::size_t ch = 0; ch < 3; ++ch) {
            const double val = base + gain[ch] * amp * wave + 12.0 * standard_normal(rng);
            img.at(ch, y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
          }
        }
      d.samples.push_back({std::move(img), c, "synth:" + std::to_string(c) + "/" + std::to_string(i)});
    }
  }
  return d;
}

void save_packed_dataset(const fs::path& path, const Dataset& dataset) {
  if (dataset.samples.empty()) throw DatasetError("cannot pack an empty dataset");
  std::vector<PackedTensor> entries;
  nlohmann::json meta;
  meta["kind"] = "nvt-dataset";
  meta["class_names"] = dataset.class_names;
  nlohmann::json sources = nlohmann::json::array();
  std::vector<std::int64_t> labels;
  for (const auto& s : dataset.samples) {
    labels.push_back(static_cast<std::int64_t>(s.label));
    sources.push_back(s.source);
  }
  meta["sources"] = std::move(sources);
  entries.push_back(PackedTensor::from_text("__meta__", meta.dump()));
  entries.push_back(PackedTensor::from_i64("labels", {labels.size()}, labels));
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const Image& img = dataset.samples[i].image;
    entries.push_back(PackedTensor::from_u8("image." + std::to_string(i), {img.channels, img.height, img.width}, img.pixels));
  }
  save_packed(path, entries);
}

Dataset load_packed_dataset(const fs::path& path) {
  const auto entries = load_packed(path);
  const PackedTensor* meta_entry = nullptr;
  const PackedTensor* label_entry = nullptr;
  for (const auto& e : entries) {
    if (e.name == "__meta__") meta_entry = &e;
    if (e.name == "labels") label_entry = &e;
  }
  if (!meta_entry || !label_entry) throw FormatError("packed dataset lacks __meta__ or labels entry", 0);
  Dataset d;
  std::vector<std::string> sources;
  try {
    const auto meta = nlohmann::json::parse(meta_entry->to_text());
    if (meta.value("kind", "") != "nvt-dataset") throw FormatError("container is not a packed dataset", 0);
    d.class_names = meta.at("class_names").get<std::vector<std::string>>();
    sources = meta.at("sources").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("packed dataset metadata: ") + e.what(), 0);
  }
  const std::vector<std::int64_t> labels = label_entry->to_i64();
  if (labels.size() != sources.size()) throw FormatError("packed dataset label/source count mismatch", 0);
  std::size_t next = 0;
  for (const auto& e : entries) {
    if (e.name.rfind("image.", 0) != 0) continue;
    if (e.name != "image." + std::to_string(next) || e.dtype != DType::U8 || e.extents.size() != 3)
      throw FormatError("unexpected packed image entry '" + e.name + "'", 0);
    if (next >= labels.size()) throw FormatError("more images than labels in packed dataset", 0);
    Image img(e.extents[0], e.extents[1], e.extents[2]);
    img.pixels = e.bytes;
    const auto label = labels[next];
    if (label < 0 || static_cast<std::size_t>(label) >= d.class_names.size())
      throw FormatError("label out of range in packed dataset", 0);
    d.samples.push_back({std::move(img), static_cast<std::size_t>(label), sources[next]});
    ++next;
  }
  if (next != labels.size()) throw FormatError("fewer images than labels in packed dataset", 0);
  return d;
}

void NormStats::validate() const {
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(std[c] > 0.0) || !std::isfinite(std[c])) throw ConfigError("normalization std must be positive per channel");
    if (!std::isfinite(mean[c])) throw ConfigError("normalization mean must be finite");
  }
}

NormStats compute_norm_stats(const Dataset& dataset) {
  if (dataset.samples.empty()) throw DatasetError("cannot compute statistics of an empty dataset");
  std::array<double, 3> sum{}, sq{};
  std::array<double, 3> count{};
  for (const auto& s : dataset.samples) {
    if (s.image.channels != 3) throw DatasetError("expected 3-channel images");
    const std::size_t plane = s.image.height * s.image.width;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = s.image.pixels[c * plane + i] / 255.0;
        sum[c] += v;
        sq[c] += v * v;
      }
      count[c] += static_cast<double>(plane);
    }
  }
  NormStats st;
  for (std::size_t c = 0; c < 3; ++c) {
    st.mean[c] = sum[c] / count[c];
    const double var = std::max(0.0, sq[c] / count[c] - st.mean[c] * st.mean[c]);
    st.std[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return st;
}

}  // namespace nvt::data
