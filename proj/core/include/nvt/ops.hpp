#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nvt/rng.hpp"
#include "nvt/tensor.hpp"

namespace nvt {

// Elementwise arithmetic with numpy-style broadcasting (right-aligned extents,
// each pair equal or one of them 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Shape broadcast_shapes(const Shape& a, const Shape& b);

// [..., M, K] x [..., K, N] -> [..., M, N]; leading batch extents broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
// Swaps the last two axes.
Tensor transpose(const Tensor& a);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// Numerically stable softmax along `axis` (max-subtracted).
Tensor softmax(const Tensor& x, std::size_t axis);

// Normalizes the last axis to zero mean / unit (biased) variance, then applies
// the affine gamma, beta of extent D.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);

// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& x);

// Inverted dropout. Returns x itself when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

// Mean over the batch of -sum_c q_c log softmax(logits)_c with
// q = (1 - epsilon) onehot(label) + epsilon / C.
Tensor label_smoothing_ce(const Tensor& logits, std::span<const std::size_t> labels, double epsilon);

// Splits [B, C, H, W] (or one [C, H, W] image) into non-overlapping
// patch_size x patch_size patches in row-major patch order, each flattened
// channel-first: [B, N, C*p*p] (or [N, C*p*p]).
Tensor patchify(const Tensor& images, std::size_t patch_size);

}  // namespace nvt
