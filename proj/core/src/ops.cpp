#include "nvt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "nvt/error.hpp"

namespace nvt {

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

// Strides of `in` expressed in the coordinate system of `out`; broadcast axes get 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  const auto in_strides = strides_of(in);
  std::vector<std::size_t> s(out.size(), 0);
  const std::size_t lead = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) s[lead + i] = in[i] == 1 ? 0 : in_strides[i];
  return s;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Calls fn(out_index, a_index, b_index) in row-major output order.
template <typename Fn>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, Fn&& fn) {
  const std::size_t n = numel(out);
  if (sa == out && sb == out) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
    return;
  }
  if (sa == out && is_suffix(sb, out)) {
    const std::size_t nb = numel(sb);
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i % nb);
    return;
  }
  if (sb == out && is_suffix(sa, out)) {
    const std::size_t na = numel(sa);
    for (std::size_t i = 0; i < n; ++i) fn(i, i % na, i);
    return;
  }
  const auto ta = broadcast_strides(sa, out);
  const auto tb = broadcast_strides(sb, out);
  std::vector<std::size_t> idx(out.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (std::size_t ax = out.size(); ax-- > 0;) {
      ++idx[ax];
      ia += ta[ax];
      ib += tb[ax];
      if (idx[ax] < out[ax]) break;
      ia -= ta[ax] * out[ax];
      ib -= tb[ax] * out[ax];
      idx[ax] = 0;
    }
  }
}

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
  Shape out = broadcast_shapes(a.shape(), b.shape());
  std::vector<double> data(numel(out));
  const auto da = a.data();
  const auto db = b.data();
  for_each_broadcast(out, a.shape(), b.shape(), [&](std::size_t i, std::size_t ia, std::size_t ib) {
    switch (kind) {
      case BinaryKind::Add: data[i] = da[ia] + db[ib]; break;
      case BinaryKind::Sub: data[i] = da[ia] - db[ib]; break;
      case BinaryKind::Mul: data[i] = da[ia] * db[ib]; break;
    }
  });
  auto ia_impl = a.impl();
  auto ib_impl = b.impl();
  return make_tracked(out, std::move(data), {&a, &b}, [ia_impl, ib_impl, kind](const TensorImpl& o) {
    auto* ga = grad_sink(ia_impl);
    auto* gb = grad_sink(ib_impl);
    const auto& g = o.grad;
    for_each_broadcast(o.shape, ia_impl->shape, ib_impl->shape, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      switch (kind) {
        case BinaryKind::Add:
          if (ga) (*ga)[ia] += g[i];
          if (gb) (*gb)[ib] += g[i];
          break;
        case BinaryKind::Sub:
          if (ga) (*ga)[ia] += g[i];
          if (gb) (*gb)[ib] -= g[i];
          break;
        case BinaryKind::Mul:
          if (ga) (*ga)[ia] += g[i] * ib_impl->data[ib];
          if (gb) (*gb)[ib] += g[i] * ia_impl->data[ia];
          break;
      }
    });
  });
}

void check_axis(const Tensor& t, std::size_t axis, const char* op) {
  if (axis >= t.rank())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(t.shape()));
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1)
      throw ShapeError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
    out[i] = std::max(ea, eb);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Mul); }

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> data(a.data().begin(), a.data().end());
  for (double& v : data) v *= factor;
  auto ai = a.impl();
  return make_tracked(a.shape(), std::move(data), {&a}, [ai, factor](const TensorImpl& o) {
    auto* ga = grad_sink(ai);
    for (std::size_t i = 0; i < o.grad.size(); ++i) (*ga)[i] += o.grad[i] * factor;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::size_t M = a.dim(a.rank() - 2), K = a.dim(a.rank() - 1);
  const std::size_t K2 = b.dim(b.rank() - 2), N = b.dim(b.rank() - 1);
  if (K != K2)
    throw ShapeError("matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  try {
    batch = broadcast_shapes(batch_a, batch_b);
  } catch (const ShapeError&) {
    throw ShapeError("matmul batch extents incompatible: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t nbatch = numel(batch);
  std::vector<std::size_t> off_a(nbatch), off_b(nbatch);
  for_each_broadcast(batch, batch_a, batch_b, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    off_a[i] = ia * M * K;
    off_b[i] = ib * K * N;
  });

  Shape out = batch;
  out.push_back(M);
  out.push_back(N);
  std::vector<double> data(nbatch * M * N, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t bi = 0; bi < nbatch; ++bi) {
    const double* A = pa + off_a[bi];
    const double* B = pb + off_b[bi];
    double* C = data.data() + bi * M * N;
    for (std::size_t m = 0; m < M; ++m) {
      double* crow = C + m * N;
      for (std::size_t k = 0; k < K; ++k) {
        const double av = A[m * K + k];
        const double* brow = B + k * N;
        for (std::size_t n = 0; n < N; ++n) crow[n] += av * brow[n];
      }
    }
  }

  auto ai = a.impl();
  auto bi_impl = b.impl();
  return make_tracked(std::move(out), std::move(data), {&a, &b},
                      [ai, bi_impl, off_a, off_b, M, K, N, nbatch](const TensorImpl& o) {
                        auto* ga = grad_sink(ai);
                        auto* gb = grad_sink(bi_impl);
                        const double* G = o.grad.data();
                        for (std::size_t bt = 0; bt < nbatch; ++bt) {
                          const double* A = ai->data.data() + off_a[bt];
                          const double* B = bi_impl->data.data() + off_b[bt];
                          const double* Gb = G + bt * M * N;
                          if (ga) {
                            double* dA = ga->data() + off_a[bt];
                            for (std::size_t m = 0; m < M; ++m)
                              for (std::size_t k = 0; k < K; ++k) {
                                double acc = 0.0;
                                const double* grow = Gb + m * N;
                                const double* brow = B + k * N;
                                for (std::size_t n = 0; n < N; ++n) acc += grow[n] * brow[n];
                                dA[m * K + k] += acc;
                              }
                          }
                          if (gb) {
                            double* dB = gb->data() + off_b[bt];
                            for (std::size_t m = 0; m < M; ++m)
                              for (std::size_t k = 0; k < K; ++k) {
                                const double av = A[m * K + k];
                                const double* grow = Gb + m * N;
                                double* drow = dB + k * N;
                                for (std::size_t n = 0; n < N; ++n) drow[n] += av * grow[n];
                              }
                          }
                        }
                      });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto ai = a.impl();
  return make_tracked(Shape{}, {s}, {&a}, [ai](const TensorImpl& o) {
    auto* ga = grad_sink(ai);
    for (double& g : *ga) g += o.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel())
    throw ShapeError("cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  std::vector<double> data(a.data().begin(), a.data().end());
  auto ai = a.impl();
  return make_tracked(std::move(shape), std::move(data), {&a}, [ai](const TensorImpl& o) {
    auto* ga = grad_sink(ai);
    for (std::size_t i = 0; i < o.grad.size(); ++i) (*ga)[i] += o.grad[i];
  });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const std::size_t r = a.rank();
  if (axes.size() != r) throw ShapeError("permute: axes length does not match rank of " + shape_str(a.shape()));
  std::vector<bool> seen(r, false);
  for (std::size_t ax : axes) {
    if (ax >= r || seen[ax]) throw ShapeError("permute: invalid axis list");
    seen[ax] = true;
  }
  const auto in_strides = strides_of(a.shape());
  Shape out(r);
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out[i] = a.dim(axes[i]);
    src_stride[i] = in_strides[axes[i]];
  }
  const std::size_t n = a.numel();
  // gather[i] = source offset of output element i
  std::vector<std::size_t> gather(n);
  {
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t i = 0; i < n; ++i) {
      gather[i] = src;
      for (std::size_t ax = r; ax-- > 0;) {
        ++idx[ax];
        src += src_stride[ax];
        if (idx[ax] < out[ax]) break;
        src -= src_stride[ax] * out[ax];
        idx[ax] = 0;
      }
    }
  }
  std::vector<double> data(n);
  const auto da = a.data();
  for (std::size_t i = 0; i < n; ++i) data[i] = da[gather[i]];
  auto ai = a.impl();
  return make_tracked(std::move(out), std::move(data), {&a}, [ai, gather = std::move(gather)](const TensorImpl& o) {
    auto* ga = grad_sink(ai);
    for (std::size_t i = 0; i < o.grad.size(); ++i) (*ga)[gather[i]] += o.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose needs rank >= 2, got " + shape_str(a.shape()));
  std::vector<std::size_t> axes(a.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(a, axes);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  check_axis(a, axis, "slice");
  if (length == 0 || start + length > a.dim(axis))
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) + ") out of range on axis " +
                     std::to_string(axis) + " of " + shape_str(a.shape()));
  const std::size_t outer = numel(Shape(a.shape().begin(), a.shape().begin() + static_cast<std::ptrdiff_t>(axis)));
  const std::size_t inner = numel(Shape(a.shape().begin() + static_cast<std::ptrdiff_t>(axis) + 1, a.shape().end()));
  const std::size_t full = a.dim(axis);
  Shape out = a.shape();
  out[axis] = length;
  std::vector<double> data(outer * length * inner);
  const auto da = a.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(da.begin() + static_cast<std::ptrdiff_t>((o * full + start) * inner), length * inner,
                data.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
  auto ai = a.impl();
  return make_tracked(std::move(out), std::move(data), {&a}, [ai, outer, inner, full, start, length](const TensorImpl& o) {
    auto* ga = grad_sink(ai);
    for (std::size_t r = 0; r < outer; ++r)
      for (std::size_t j = 0; j < length * inner; ++j)
        (*ga)[(r * full + start) * inner + j] += o.grad[r * length * inner + j];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  check_axis(parts.front(), axis, "concat");
  Shape out = parts.front().shape();
  out[axis] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != out.size()) throw ShapeError("concat: rank mismatch with " + shape_str(p.shape()));
    for (std::size_t i = 0; i < out.size(); ++i)
      if (i != axis && p.dim(i) != parts.front().dim(i))
        throw ShapeError("concat: shapes " + shape_str(parts.front().shape()) + " and " + shape_str(p.shape()) +
                         " differ off-axis");
    out[axis] += p.dim(axis);
  }
  const std::size_t outer = numel(Shape(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(axis)));
  const std::size_t inner = numel(Shape(out.begin() + static_cast<std::ptrdiff_t>(axis) + 1, out.end()));
  const std::size_t total = out[axis];
  std::vector<double> data(numel(out));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.dim(axis);
    const auto dp = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(dp.begin() + static_cast<std::ptrdiff_t>(o * len * inner), len * inner,
                  data.begin() + static_cast<std::ptrdiff_t>((o * total + off) * inner));
    off += len;
  }
  std::vector<std::shared_ptr<TensorImpl>> impls;
  for (const Tensor& p : parts) impls.push_back(p.impl());
  return make_tracked(std::move(out), std::move(data), parts,
                      [impls, offsets, outer, inner, total, axis](const TensorImpl& o) {
                        for (std::size_t pi = 0; pi < impls.size(); ++pi) {
                          auto* g = grad_sink(impls[pi]);
                          if (!g) continue;
                          const std::size_t len = impls[pi]->shape[axis];
                          for (std::size_t r = 0; r < outer; ++r)
                            for (std::size_t j = 0; j < len * inner; ++j)
                              (*g)[r * len * inner + j] += o.grad[(r * total + offsets[pi]) * inner + j];
                        }
                      });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "softmax");
  const auto dx = x.data();
  for (double v : dx)
    if (!std::isfinite(v)) throw NumericInputError("softmax: non-finite input");
  const std::size_t n = x.dim(axis);
  const std::size_t outer = numel(Shape(x.shape().begin(), x.shape().begin() + static_cast<std::ptrdiff_t>(axis)));
  const std::size_t inner = numel(Shape(x.shape().begin() + static_cast<std::ptrdiff_t>(axis) + 1, x.shape().end()));
  std::vector<double> y(x.numel());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, dx[base + j * inner]);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(dx[base + j * inner] - mx);
        y[base + j * inner] = e;
        s += e;
      }
      for (std::size_t j = 0; j < n; ++j) y[base + j * inner] /= s;
    }
  auto xi = x.impl();
  auto yv = y;
  return make_tracked(x.shape(), std::move(y), {&x}, [xi, yv = std::move(yv), n, outer, inner](const TensorImpl& o) {
    auto* gx = grad_sink(xi);
    for (std::size_t r = 0; r < outer; ++r)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = r * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += o.grad[base + j * inner] * yv[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = base + j * inner;
          (*gx)[k] += yv[k] * (o.grad[k] - dot);
        }
      }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  if (x.rank() < 1) throw ShapeError("layer_norm needs rank >= 1");
  const std::size_t D = x.dim(x.rank() - 1);
  if (gamma.shape() != Shape{D} || beta.shape() != Shape{D})
    throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(D) + "], got " + shape_str(gamma.shape()) +
                     " and " + shape_str(beta.shape()));
  const std::size_t rows = x.numel() / D;
  const auto dx = x.data();
  const auto dg = gamma.data();
  const auto db = beta.data();
  std::vector<double> xhat(x.numel()), rstd(rows), y(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = dx.data() + r * D;
    double mu = 0.0;
    for (std::size_t d = 0; d < D; ++d) mu += row[d];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t d = 0; d < D; ++d) var += (row[d] - mu) * (row[d] - mu);
    var /= static_cast<double>(D);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t d = 0; d < D; ++d) {
      const double h = (row[d] - mu) * rs;
      xhat[r * D + d] = h;
      y[r * D + d] = h * dg[d] + db[d];
    }
  }
  auto xi = x.impl();
  auto gi = gamma.impl();
  auto bi = beta.impl();
  return make_tracked(x.shape(), std::move(y), {&x, &gamma, &beta},
                      [xi, gi, bi, xhat = std::move(xhat), rstd = std::move(rstd), rows, D](const TensorImpl& o) {
                        auto* gx = grad_sink(xi);
                        auto* gg = grad_sink(gi);
                        auto* gb = grad_sink(bi);
                        const double invD = 1.0 / static_cast<double>(D);
                        for (std::size_t r = 0; r < rows; ++r) {
                          const double* g = o.grad.data() + r * D;
                          const double* h = xhat.data() + r * D;
                          if (gg)
                            for (std::size_t d = 0; d < D; ++d) (*gg)[d] += g[d] * h[d];
                          if (gb)
                            for (std::size_t d = 0; d < D; ++d) (*gb)[d] += g[d];
                          if (gx) {
                            double m1 = 0.0, m2 = 0.0;
                            for (std::size_t d = 0; d < D; ++d) {
                              const double dh = g[d] * gi->data[d];
                              m1 += dh;
                              m2 += dh * h[d];
                            }
                            m1 *= invD;
                            m2 *= invD;
                            for (std::size_t d = 0; d < D; ++d) {
                              const double dh = g[d] * gi->data[d];
                              (*gx)[r * D + d] += rstd[r] * (dh - m1 - h[d] * m2);
                            }
                          }
                        }
                      });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  const auto dx = x.data();
  std::vector<double> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = dx[i];
    y[i] = 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v)));
  }
  auto xi = x.impl();
  return make_tracked(x.shape(), std::move(y), {&x}, [xi](const TensorImpl& o) {
    auto* gx = grad_sink(xi);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double v = xi->data[i];
      const double t = std::tanh(c * (v + k * v * v * v));
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * k * v * v);
      (*gx)[i] += o.grad[i] * d;
    }
  });
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout probability must be in [0, 1)");
  if (p == 0.0) return x;
  const double keep = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = uniform01(rng) < p ? 0.0 : keep;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

Tensor label_smoothing_ce(const Tensor& logits, std::span<const std::size_t> labels, double epsilon) {
  if (logits.rank() != 2) throw ShapeError("label_smoothing_ce expects [B, C] logits, got " + shape_str(logits.shape()));
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ContractError("label smoothing epsilon must be in [0, 1)");
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  if (labels.size() != B)
    throw ShapeError("label count " + std::to_string(labels.size()) + " does not match batch " + std::to_string(B));
  for (std::size_t b = 0; b < B; ++b)
    if (labels[b] >= C)
      throw IndexError("label " + std::to_string(labels[b]) + " out of range for " + std::to_string(C) + " classes");
  const auto z = logits.data();
  std::vector<double> probs(B * C);
  double total = 0.0;
  const double off = epsilon / static_cast<double>(C);
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = z.data() + b * C;
    double mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += std::exp(row[c] - mx);
    const double lse = mx + std::log(s);
    double loss = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double logp = row[c] - lse;
      probs[b * C + c] = std::exp(logp);
      const double q = (c == labels[b] ? 1.0 - epsilon : 0.0) + off;
      loss -= q * logp;
    }
    total += loss;
  }
  total /= static_cast<double>(B);
  auto li = logits.impl();
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return make_tracked(Shape{}, {total}, {&logits},
                      [li, probs = std::move(probs), lab = std::move(lab), B, C, epsilon, off](const TensorImpl& o) {
                        auto* g = grad_sink(li);
                        const double scale_b = o.grad[0] / static_cast<double>(B);
                        for (std::size_t b = 0; b < B; ++b)
                          for (std::size_t c = 0; c < C; ++c) {
                            const double q = (c == lab[b] ? 1.0 - epsilon : 0.0) + off;
                            (*g)[b * C + c] += scale_b * (probs[b * C + c] - q);
                          }
                      });
}

Tensor patchify(const Tensor& images, std::size_t patch_size) {
  if (images.rank() == 3) {
    Shape s = images.shape();
    s.insert(s.begin(), 1);
    Tensor out = patchify(reshape(images, s), patch_size);
    return reshape(out, Shape{out.dim(1), out.dim(2)});
  }
  if (images.rank() != 4) throw ShapeError("patchify expects [B, C, H, W], got " + shape_str(images.shape()));
  const std::size_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
  if (patch_size == 0 || H % patch_size != 0 || W % patch_size != 0)
    throw ConfigError("image " + std::to_string(H) + "x" + std::to_string(W) + " is not divisible by patch size " +
                      std::to_string(patch_size));
  const std::size_t p = patch_size, gy = H / p, gx = W / p;
  // [B, C, gy, p, gx, p] -> [B, gy, gx, C, p, p]
  Tensor six = reshape(images, Shape{B, C, gy, p, gx, p});
  Tensor moved = permute(six, {0, 2, 4, 1, 3, 5});
  return reshape(moved, Shape{B, gy * gx, C * p * p});
}

}  // namespace nvt
