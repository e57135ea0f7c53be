#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "beamgat/tensor.hpp"

// Differentiable operations. Each op records itself on the tape of its
// tracked inputs; with no tracked inputs it is a plain computation.
namespace beamgat::ad {

// CSR offsets: segment i covers [offsets[i], offsets[i+1]).
using Segments = std::span<const std::size_t>;

inline constexpr double kDefaultLeakySlope = 0.2;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// x[N×F] + bias[F] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

// max(x, slope*x); the derivative at 0 is taken as `slope`.
Tensor leaky_relu(const Tensor& x, double slope = kDefaultLeakySlope);
Tensor elu(const Tensor& x);

// Max-subtracted softmax inside each segment of a rank-1 score vector.
Tensor segment_softmax(const Tensor& scores, Segments offsets);
// out[i] = sum over e in segment i of alpha[e] * messages[e].
Tensor segment_weighted_sum(const Tensor& alpha, const Tensor& messages, Segments offsets);
// Fused gather + weighted sum: out[i] = sum over e in segment i of
// alpha[e] * x[neighbors[e]]. Never materialises the per-edge messages.
Tensor neighbor_weighted_sum(const Tensor& alpha, const Tensor& x, std::span<const std::size_t> neighbors,
                             Segments offsets);

// Row gather: out[e] = x[index[e]]. Works on rank-1 and rank-2 inputs.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

Tensor concat_columns(std::span<const Tensor> parts);
Tensor slice_columns(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

// Inverted dropout. Identity when `training` is false or `rate` is 0.
Tensor apply_dropout(const Tensor& x, double rate, std::uint64_t seed, bool training);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Owner segment of every edge, expanded from CSR offsets.
std::vector<std::size_t> segment_ids(Segments offsets);

}  // namespace beamgat::ad
