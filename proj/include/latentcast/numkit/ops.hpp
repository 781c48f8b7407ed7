#pragma once

#include "latentcast/numkit/autodiff.hpp"

#include <cstdint>
#include <span>

namespace latentcast::numkit {

// Differentiable ops. Binary elementwise ops accept either equal shapes or a
// right operand whose shape is a suffix of the left one (leading-axis batch
// broadcast). Nothing else broadcasts.

template <typename S> BasicVar<S> add(BasicVar<S> a, BasicVar<S> b);
template <typename S> BasicVar<S> sub(BasicVar<S> a, BasicVar<S> b);
template <typename S> BasicVar<S> mul(BasicVar<S> a, BasicVar<S> b);
template <typename S> BasicVar<S> scale(BasicVar<S> a, S factor);

/// [..., K] x [K, N] -> [..., N]
template <typename S> BasicVar<S> matmul(BasicVar<S> a, BasicVar<S> w);

template <typename S> BasicVar<S> softmax(BasicVar<S> a);
/// tanh approximation
template <typename S> BasicVar<S> gelu(BasicVar<S> a);
template <typename S> BasicVar<S> softplus(BasicVar<S> a);
template <typename S> BasicVar<S> tanh(BasicVar<S> a);

/// Multi-head scaled dot-product attention.
/// q: [B, Lq, D], k and v: [B, Lk, D]; D divisible by heads. Returns [B, Lq, D].
template <typename S> BasicVar<S> attention(BasicVar<S> q, BasicVar<S> k, BasicVar<S> v, int heads);

/// Mean over axis -2: [..., L, D] -> [..., D].
template <typename S> BasicVar<S> mean_pool(BasicVar<S> a);

/// Row gather from a [V, D] table; also serves as tile/permute for token grids.
template <typename S> BasicVar<S> embedding(BasicVar<S> table, std::span<const std::int64_t> indices);

/// Normalizes over the last axis (epsilon 1e-5 inside the square root), then
/// applies the learned per-feature scale and offset.
template <typename S> BasicVar<S> layer_norm(BasicVar<S> x, BasicVar<S> scale, BasicVar<S> offset);

/// Stacks the [rows, C] matrix views of every part: -> [sum rows, C].
template <typename S> BasicVar<S> concat_rows(std::span<const BasicVar<S>> parts);

template <typename S> BasicVar<S> reshape(BasicVar<S> a, Shape shape);

/// Rows [begin, end) along axis -2.
template <typename S> BasicVar<S> slice_rows(BasicVar<S> a, std::int64_t begin, std::int64_t end);

/// Columns [begin, end) along the last axis.
template <typename S> BasicVar<S> slice_cols(BasicVar<S> a, std::int64_t begin, std::int64_t end);

template <typename S> BasicVar<S> sum(BasicVar<S> a);
template <typename S> BasicVar<S> mean(BasicVar<S> a);

/// Elementwise Huber penalty.
template <typename S> BasicVar<S> huber(BasicVar<S> a, S delta);

/// Elementwise binary cross-entropy between logits and constant {0,1} targets.
template <typename S> BasicVar<S> bce_with_logits(BasicVar<S> logits, const BasicTensor<S>& targets);

/// Convenience: mean((a - target)^2) against a constant target.
template <typename S> BasicVar<S> mse(BasicVar<S> a, const BasicTensor<S>& target);

constexpr double kLayerNormEpsilon = 1e-5;

}  // namespace latentcast::numkit
