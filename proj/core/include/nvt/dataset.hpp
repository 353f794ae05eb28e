#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nvt/image.hpp"

namespace nvt::data {

struct ManifestEntry {
  std::filesystem::path path;
  std::size_t label = 0;
  bool operator==(const ManifestEntry&) const = default;
};

// Index of a class-per-folder corpus: root/<split>/<class_name>/<file>.
// Classes are numbered in lexicographic folder order; entries are sorted by
// class, then file name.
struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  std::string split;
  std::size_t skipped = 0;  // unreadable files left out

  bool operator==(const DatasetManifest&) const = default;
};

DatasetManifest scan_image_folder(const std::filesystem::path& root, const std::string& split);

struct Sample {
  Image image;
  std::size_t label = 0;
  std::string source;
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<Sample> samples;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t size() const { return samples.size(); }
  std::vector<std::size_t> labels() const;
  bool operator==(const Dataset&) const = default;
};

Dataset load_manifest(const DatasetManifest& manifest);

// Procedural texture classes (stripes at several orientations, checkerboards,
// rings) with class-specific frequency and random phase, amplitude, tint and
// pixel noise. Exactly per_class samples per class, deterministic per seed.
Dataset synth_dataset(std::size_t num_classes, std::size_t per_class, std::size_t image_size, std::uint64_t seed);

// Packed layout: "labels" i64[N], one u8 [3, H, W] entry "image.<i>" per
// sample, and a "__meta__" JSON blob with class names and sources.
void save_packed_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_packed_dataset(const std::filesystem::path& path);

struct NormStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  void validate() const;
  bool operator==(const NormStats&) const = default;
};

// Per-channel mean / population std of intensity / 255 over every pixel.
NormStats compute_norm_stats(const Dataset& dataset);

}  // namespace nvt::data
