#pragma once

#include <cstddef>
#include <functional>
#include <limits>

#include "nvt/tensor.hpp"

namespace nvt {

// Marker used for log|det| of a singular matrix.
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct LogDet {
  int sign = 0;              // -1, 0 (singular) or +1
  double log_abs = kNegInf;  // ln|det m|, kNegInf when singular
  bool singular() const { return sign == 0; }
};

// Partial-pivot LU. A pivot below 1e-12 * N * max|entry| marks the matrix singular.
LogDet lu_logdet(const Tensor& m);

// Count of pivots above the same threshold.
std::size_t numerical_rank(const Tensor& m);

// Worst componentwise relative error |a - b| / max(|a|, |b|, 1e-8) between the
// gradient from backward() and central differences (f(x+h) - f(x-h)) / 2h.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step = 1e-5);

}  // namespace nvt
