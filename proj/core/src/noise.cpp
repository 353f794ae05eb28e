#include "nvt/noise.hpp"

#include <cmath>
#include <numeric>

#include "nvt/error.hpp"
#include "nvt/rng.hpp"

namespace nvt::noise {

std::string kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Identity: return "identity";
    case NoiseKind::CyclicMix: return "cyclic_mix";
    case NoiseKind::CyclicShiftAdd: return "cyclic_shift_add";
    case NoiseKind::Custom: return "custom";
  }
  return "unknown";
}

NoiseKind parse_kind(const std::string& name) {
  if (name == "identity") return NoiseKind::Identity;
  if (name == "cyclic_mix") return NoiseKind::CyclicMix;
  if (name == "cyclic_shift_add") return NoiseKind::CyclicShiftAdd;
  if (name == "custom") return NoiseKind::Custom;
  throw ConfigError("unknown noise kind '" + name + "' (expected identity, cyclic_mix, cyclic_shift_add or custom)");
}

std::optional<std::pair<double, double>> QualityKind::circulant_coefficients() const {
  switch (kind) {
    case NoiseKind::Identity: return std::pair{1.0, 0.0};
    case NoiseKind::CyclicMix: return std::pair{1.0 - alpha, alpha};
    case NoiseKind::CyclicShiftAdd: return std::pair{1.0, alpha};
    case NoiseKind::Custom: return std::nullopt;
  }
  return std::nullopt;
}

bool QualityMatrix::is_identity() const {
  const std::size_t n = batch_size();
  const auto d = realized.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (d[i * n + j] != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

void NoiseConfig::validate(std::size_t depth) const {
  if (layer_index >= depth)
    throw ConfigError("noise layer_index " + std::to_string(layer_index) + " must be < depth " + std::to_string(depth));
  if (!std::isfinite(quality.alpha)) throw ConfigError("noise alpha must be finite");
  if (quality.kind == NoiseKind::Custom) {
    const auto& m = quality.custom;
    if (m.empty()) throw ConfigError("custom quality matrix is empty");
    for (const auto& row : m)
      if (row.size() != m.size()) throw ConfigError("custom quality matrix must be square");
  }
}

NoiseConfig default_noise_config(std::size_t depth, QualityKind quality) {
  if (depth == 0) throw ConfigError("depth must be >= 1");
  return NoiseConfig{depth - 1, std::move(quality), std::nullopt};
}

NoiseConfig random_layer_noise_config(std::size_t depth, QualityKind quality, std::uint64_t seed) {
  if (depth == 0) throw ConfigError("depth must be >= 1");
  Rng rng(derive_seed(seed, {0x6c61796572ULL}));
  return NoiseConfig{static_cast<std::size_t>(uniform_index(rng, depth)), std::move(quality), seed};
}

QualityMatrix build_quality_matrix(const QualityKind& kind, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("quality matrix batch size must be >= 1");
  if (kind.kind == NoiseKind::Custom) {
    const auto& m = kind.custom;
    if (m.size() != batch_size)
      throw ConfigError("custom quality matrix is " + std::to_string(m.size()) + "x" + std::to_string(m.size()) +
                        " but the batch has " + std::to_string(batch_size) + " samples");
    for (const auto& row : m)
      if (row.size() != batch_size) throw ConfigError("custom quality matrix must be square");
    return QualityMatrix{kind, Tensor::from_rows(m)};
  }
  const auto [c0, c1] = *kind.circulant_coefficients();
  Tensor q({batch_size, batch_size}, 0.0);
  auto d = q.mutable_data();
  for (std::size_t b = 0; b < batch_size; ++b) {
    d[b * batch_size + b] += c0;
    d[b * batch_size + (b + 1) % batch_size] += c1;
  }
  return QualityMatrix{kind, std::move(q)};
}

Tensor inject(const Tensor& features, const QualityMatrix& q) {
  if (features.rank() < 1) throw ShapeError("inject needs a batched feature tensor");
  const std::size_t B = features.dim(0);
  if (q.batch_size() != B)
    throw ShapeError("quality matrix realized for batch " + std::to_string(q.batch_size()) + " applied to features " +
                     shape_str(features.shape()));
  const std::size_t row = features.numel() / B;
  const auto x = features.data();
  const auto qd = q.realized.data();
  std::vector<double> out(features.numel());
  for (std::size_t b = 0; b < B; ++b) {
    double* dst = out.data() + b * row;
    bool first = true;
    for (std::size_t j = 0; j < B; ++j) {
      const double c = qd[b * B + j];
      if (c == 0.0) continue;
      const double* src = x.data() + j * row;
      if (first) {
        for (std::size_t i = 0; i < row; ++i) dst[i] = c * src[i];
        first = false;
      } else {
        for (std::size_t i = 0; i < row; ++i) dst[i] += c * src[i];
      }
    }
  }
  auto fi = features.impl();
  Tensor qm = q.realized;
  return make_tracked(features.shape(), std::move(out), {&features}, [fi, qm, B, row](const TensorImpl& o) {
    auto* g = grad_sink(fi);
    const auto qd = qm.data();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < B; ++j) {
        const double c = qd[b * B + j];
        if (c == 0.0) continue;
        const double* gb = o.grad.data() + b * row;
        double* dst = g->data() + j * row;
        for (std::size_t i = 0; i < row; ++i) dst[i] += c * gb[i];
      }
  });
}

EntropyReport entropy_delta_exact(const QualityMatrix& q, std::size_t tokens, std::size_t channels) {
  const LogDet ld = lu_logdet(q.realized);
  EntropyReport r;
  r.sign = ld.sign;
  r.singular = ld.singular();
  r.log_abs_det_q = ld.log_abs;
  r.effective_log_det = ld.singular() ? kNegInf : static_cast<double>(tokens * channels) * ld.log_abs;
  r.tokens = tokens;
  r.channels = channels;
  return r;
}

namespace {

struct MomentAccumulator {
  std::size_t n;
  std::size_t count = 0;
  std::vector<double> sum;
  std::vector<double> outer;

  explicit MomentAccumulator(std::size_t dim) : n(dim), sum(dim, 0.0), outer(dim * dim, 0.0) {}

  void add(const std::vector<double>& v) {
    ++count;
    for (std::size_t i = 0; i < n; ++i) {
      sum[i] += v[i];
      for (std::size_t j = 0; j < n; ++j) outer[i * n + j] += v[i] * v[j];
    }
  }

  void merge(const MomentAccumulator& o) {
    count += o.count;
    for (std::size_t i = 0; i < n; ++i) sum[i] += o.sum[i];
    for (std::size_t i = 0; i < n * n; ++i) outer[i] += o.outer[i];
  }

  Tensor covariance() const {
    const double N = static_cast<double>(count);
    std::vector<double> c(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] = (outer[i * n + j] - sum[i] * sum[j] / N) / (N - 1.0);
    return Tensor({n, n}, std::move(c));
  }
};

// 0.5 ln det(2 pi e Sigma); throws on rank deficiency.
double gaussian_entropy(const MomentAccumulator& acc, const char* which) {
  const Tensor cov = acc.covariance();
  const LogDet ld = lu_logdet(cov);
  if (ld.singular() || ld.sign < 0) {
    throw EstimationError(std::string("sample covariance ") + which + " injection is rank deficient: rank " +
                          std::to_string(numerical_rank(cov)) + " of " + std::to_string(acc.n));
  }
  const double n = static_cast<double>(acc.n);
  return 0.5 * (n * std::log(2.0 * std::numbers::pi * std::numbers::e) + ld.log_abs);
}

}  // namespace

EntropyReport entropy_delta_empirical(const QualityMatrix& q, std::size_t tokens, std::size_t channels,
                                      std::size_t trials, std::uint64_t seed) {
  if (trials < 1000) throw ContractError("entropy_delta_empirical needs at least 1000 trials");
  if (tokens == 0 || channels == 0) throw ContractError("tokens and channels must be >= 1");
  EntropyReport report = entropy_delta_exact(q, tokens, channels);
  const std::size_t B = q.batch_size();
  const std::size_t row = tokens * channels;
  const std::size_t n = B * row;
  const auto qd = q.realized.data();

  constexpr std::size_t kChunks = 10;
  std::vector<MomentAccumulator> before(kChunks, MomentAccumulator(n));
  std::vector<MomentAccumulator> after(kChunks, MomentAccumulator(n));
  Rng rng(seed);
  std::vector<double> x(n), y(n);
  for (std::size_t t = 0; t < trials; ++t) {
    for (double& v : x) v = standard_normal(rng);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < row; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < B; ++j) acc += qd[b * B + j] * x[j * row + i];
        y[b * row + i] = acc;
      }
    const std::size_t chunk = t * kChunks / trials;
    before[chunk].add(x);
    after[chunk].add(y);
  }

  std::vector<double> chunk_delta;
  MomentAccumulator all_before(n), all_after(n);
  for (std::size_t c = 0; c < kChunks; ++c) {
    all_before.merge(before[c]);
    all_after.merge(after[c]);
    if (before[c].count > n + 1)
      chunk_delta.push_back(gaussian_entropy(after[c], "after") - gaussian_entropy(before[c], "before"));
  }
  report.empirical_delta = gaussian_entropy(all_after, "after") - gaussian_entropy(all_before, "before");
  if (chunk_delta.size() >= 2) {
    const double m = std::accumulate(chunk_delta.begin(), chunk_delta.end(), 0.0) / static_cast<double>(chunk_delta.size());
    double ss = 0.0;
    for (double d : chunk_delta) ss += (d - m) * (d - m);
    const double k = static_cast<double>(chunk_delta.size());
    report.standard_error = std::sqrt(ss / (k - 1.0) / k);
  }
  report.sample_count = trials;
  return report;
}

}  // namespace nvt::noise
