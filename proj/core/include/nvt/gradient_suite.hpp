#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nvt/tensor.hpp"

namespace nvt {

struct GradCase {
  std::string name;
  std::function<Tensor(const Tensor&)> fn;  // scalar-valued
  Tensor point;
  double step = 1e-5;
};

struct GradCaseResult {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradTolerance = 1e-4;

// Every differentiable operation, each input probed separately, plus the desk
// ViT forward and loss (image 32, patch 8, dim 16, depth 2, heads 2, batch 2)
// with respect to the input batch and several parameter tensors. Outputs are
// contracted with fixed random weights so every element contributes.
std::vector<GradCase> gradient_suite(std::uint64_t seed);

std::vector<GradCaseResult> run_gradient_suite(std::uint64_t seed, double tolerance = kGradTolerance);

}  // namespace nvt
