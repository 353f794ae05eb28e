#include "nvt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nvt/error.hpp"

namespace nvt {

namespace {

struct Factorization {
  int sign = 1;
  double log_abs = 0.0;
  std::size_t rank = 0;
};

Factorization factor(const Tensor& m) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw ShapeError("expected a square matrix, got " + shape_str(m.shape()));
  const std::size_t n = m.dim(0);
  std::vector<double> a(m.data().begin(), m.data().end());
  double max_entry = 0.0;
  for (double v : a) max_entry = std::max(max_entry, std::abs(v));
  const double tol = 1e-12 * static_cast<double>(n) * max_entry;

  Factorization f;
  bool singular = max_entry == 0.0;
  for (std::size_t col = 0, row = 0; col < n && row < n; ++col) {
    std::size_t piv = row;
    for (std::size_t r = row + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    const double p = a[piv * n + col];
    if (std::abs(p) <= tol || p == 0.0) {
      singular = true;
      continue;
    }
    if (piv != row) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[row * n + c]);
      f.sign = -f.sign;
    }
    if (p < 0) f.sign = -f.sign;
    f.log_abs += std::log(std::abs(p));
    for (std::size_t r = row + 1; r < n; ++r) {
      const double factor = a[r * n + col] / p;
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[row * n + c];
    }
    ++f.rank;
    ++row;
  }
  if (singular) {
    f.sign = 0;
    f.log_abs = kNegInf;
  }
  return f;
}

}  // namespace

LogDet lu_logdet(const Tensor& m) {
  const Factorization f = factor(m);
  return LogDet{f.sign, f.log_abs};
}

std::size_t numerical_rank(const Tensor& m) { return factor(m).rank; }

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step) {
  if (!(step > 0.0)) throw ContractError("grad_check step must be positive");
  Tensor x = point.detach();
  x.set_requires_grad(true);
  Tensor y = f(x);
  if (y.numel() != 1) throw ContractError("grad_check needs a scalar-valued function");
  y.backward();
  const std::vector<double> analytic = x.grad();

  NoGradGuard no_grad;
  Tensor probe = point.detach();
  auto data = probe.mutable_data();
  double worst = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double orig = data[i];
    data[i] = orig + step;
    const double fp = f(probe).item();
    data[i] = orig - step;
    const double fm = f(probe).item();
    data[i] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace nvt
