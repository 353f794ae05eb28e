#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nvt/linalg.hpp"
#include "nvt/tensor.hpp"

namespace nvt::noise {

enum class NoiseKind { Identity, CyclicMix, CyclicShiftAdd, Custom };

std::string kind_name(NoiseKind kind);
NoiseKind parse_kind(const std::string& name);

// Family of the B x B quality matrix. P below is the one-step cyclic
// permutation: row b takes from row (b + 1) mod B.
//   Identity          -> I
//   CyclicMix(a)      -> (1 - a) I + a P
//   CyclicShiftAdd(a) -> I + a P
//   Custom(M)         -> M (fixed size)
struct QualityKind {
  NoiseKind kind = NoiseKind::Identity;
  double alpha = 0.0;
  std::vector<std::vector<double>> custom;

  static QualityKind identity() { return {}; }
  static QualityKind cyclic_mix(double alpha) { return {NoiseKind::CyclicMix, alpha, {}}; }
  static QualityKind cyclic_shift_add(double alpha) { return {NoiseKind::CyclicShiftAdd, alpha, {}}; }
  static QualityKind custom_matrix(std::vector<std::vector<double>> m) { return {NoiseKind::Custom, 0.0, std::move(m)}; }

  // (diagonal, off-diagonal) coefficients of c0 I + c1 P; Custom has none.
  std::optional<std::pair<double, double>> circulant_coefficients() const;

  bool operator==(const QualityKind&) const = default;
};

struct QualityMatrix {
  QualityKind kind;
  Tensor realized;  // [B, B]

  std::size_t batch_size() const { return realized.dim(0); }
  bool is_identity() const;
};

// Which encoder layer receives the noise and with which Q family. Fixed at
// setup and used unchanged for every training and inference forward pass.
struct NoiseConfig {
  std::size_t layer_index = 0;
  QualityKind quality;
  std::optional<std::uint64_t> selection_seed;

  void validate(std::size_t depth) const;
  bool operator==(const NoiseConfig&) const = default;
};

// Last encoder layer, the default injection point.
NoiseConfig default_noise_config(std::size_t depth, QualityKind quality);
// Layer drawn uniformly from [0, depth) with `seed`; the seed is kept in the config.
NoiseConfig random_layer_noise_config(std::size_t depth, QualityKind quality, std::uint64_t seed);

QualityMatrix build_quality_matrix(const QualityKind& kind, std::size_t batch_size);

// out[b, ...] = sum_j q[b, j] * features[j, ...]. Zero coefficients are
// skipped, so the identity realization returns the input bit for bit.
Tensor inject(const Tensor& features, const QualityMatrix& q);

struct EntropyReport {
  int sign = 0;  // sign of det Q; 0 when singular
  double log_abs_det_q = kNegInf;
  double effective_log_det = kNegInf;  // tokens * channels * log_abs_det_q
  bool singular = true;
  std::optional<double> empirical_delta;
  std::optional<double> standard_error;
  std::size_t sample_count = 0;
  std::size_t tokens = 0;
  std::size_t channels = 0;
};

// Differential-entropy change of X' = (Q (x) I_{T*D}) X: T * D * ln|det Q|.
EntropyReport entropy_delta_exact(const QualityMatrix& q, std::size_t tokens, std::size_t channels);

// Monte-Carlo check of the same quantity: draws `trials` standard-normal
// batches, stacks each into a B*T*D vector, and differences the Gaussian
// entropy estimates 0.5 ln det(2 pi e Sigma_hat) after and before injection.
// Throws EstimationError when a sample covariance is rank deficient.
EntropyReport entropy_delta_empirical(const QualityMatrix& q, std::size_t tokens, std::size_t channels,
                                      std::size_t trials, std::uint64_t seed);

}  // namespace nvt::noise
