#pragma once

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include "nvt/rng.hpp"
#include "nvt/tensor.hpp"

namespace testutil {

inline nvt::Tensor random_tensor(nvt::Rng& rng, nvt::Shape shape, double lo = -1.0, double hi = 1.0) {
  nvt::Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = nvt::uniform(rng, lo, hi);
  return t;
}

inline double max_abs_diff(const nvt::Tensor& a, const nvt::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline bool bit_equal(const nvt::Tensor& a, const nvt::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (std::memcmp(&a.data()[i], &b.data()[i], sizeof(double)) != 0) return false;
  return true;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("nvt_test_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
