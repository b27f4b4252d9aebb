// Copyright 2026  The dsvae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dsvae/tape.hpp"

namespace dsvae::ad {

// Differentiable operations over tape variables. Each op validates extents
// and throws DimensionError naming the offending shapes. All ops are
// explicitly instantiated for float (training) and double (gradient checks).

/// Floor applied to log/sqrt inputs.
inline constexpr double kLogFloor = 1e-12;

enum class UnaryKind {
  kRelu,
  kLeakyRelu,  // param = negative slope
  kSigmoid,
  kExp,
  kLog,  // input clamped to >= kLogFloor
  kSquare,
  kSqrt,  // input clamped to >= kLogFloor
  kNegate,
  kScale,      // param = factor
  kAddScalar,  // param = offset
  kAbs,
  kClamp,  // [param, param2]; gradient passes only strictly inside
};

struct UnaryOp {
  UnaryKind kind;
  double param = 0.0;
  double param2 = 0.0;
};

enum class BinaryKind { kAdd, kSub, kMul, kDiv };

enum class ReduceKind { kSum, kMean };

/// Rank-2 matrix product.
template <class T>
BasicVar<T> matmul(const BasicVar<T>& a, const BasicVar<T>& b);

/// Rank-2 transpose.
template <class T>
BasicVar<T> transpose(const BasicVar<T>& a);

/// Cross-correlation. input [N, C, H, W], kernel [O, C, K, K] (square).
template <class T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& kernel,
                   std::size_t stride, std::size_t padding);

/// Adjoint of conv2d with respect to its input. input [N, Cin, H, W],
/// kernel [Cin, Cout, K, K]; output extent (H - 1) * stride - 2 * padding + K.
/// With the same kernel tensor, conv2d_transpose(y, k) equals the gradient
/// of <conv2d(x, k), y> with respect to x.
template <class T>
BasicVar<T> conv2d_transpose(const BasicVar<T>& input,
                             const BasicVar<T>& kernel, std::size_t stride,
                             std::size_t padding);

template <class T>
BasicVar<T> map_unary(UnaryOp op, const BasicVar<T>& x);

/// Elementwise a (op) b. Shapes must match, except that either side may hold
/// a single element, which is broadcast.
template <class T>
BasicVar<T> zip_binary(BinaryKind kind, const BasicVar<T>& a,
                       const BasicVar<T>& b);

/// Sum or mean over `axes` (all axes when absent); reduced axes are removed.
template <class T>
BasicVar<T> reduce(ReduceKind kind, const BasicVar<T>& x,
                   std::optional<std::vector<std::size_t>> axes = std::nullopt);

template <class T>
BasicVar<T> reshape(const BasicVar<T>& x, Shape shape);

/// Adds b[c] to every element whose axis-1 index is c. x has rank >= 2.
template <class T>
BasicVar<T> add_bias(const BasicVar<T>& x, const BasicVar<T>& b);

/// Joins two tensors along `axis`; all other extents must match.
template <class T>
BasicVar<T> concat(const BasicVar<T>& a, const BasicVar<T>& b,
                   std::size_t axis);

/// Scales each row of a rank-2 tensor to unit L2 norm, with the norm floored
/// at `eps`.
template <class T>
BasicVar<T> normalize_rows(const BasicVar<T>& x, double eps = 1e-12);

/// Mean over rows of -log softmax(logits)[label]. logits [N, C].
template <class T>
BasicVar<T> cross_entropy(const BasicVar<T>& logits,
                          std::span<const int> labels);

// Shorthands.

template <class T>
BasicVar<T> relu(const BasicVar<T>& x) {
  return map_unary({UnaryKind::kRelu}, x);
}
template <class T>
BasicVar<T> leaky_relu(const BasicVar<T>& x, double slope = 0.2) {
  return map_unary({UnaryKind::kLeakyRelu, slope}, x);
}
template <class T>
BasicVar<T> sigmoid(const BasicVar<T>& x) {
  return map_unary({UnaryKind::kSigmoid}, x);
}
template <class T>
BasicVar<T> exp(const BasicVar<T>& x) {
  return map_unary({UnaryKind::kExp}, x);
}
template <class T>
BasicVar<T> log(const BasicVar<T>& x) {
  return map_unary({UnaryKind::kLog}, x);
}
template <class T>
BasicVar<T> square(const BasicVar<T>& x) {
  return map_unary({UnaryKind::kSquare}, x);
}
template <class T>
BasicVar<T> sqrt(const BasicVar<T>& x) {
  return map_unary({UnaryKind::kSqrt}, x);
}
template <class T>
BasicVar<T> negate(const BasicVar<T>& x) {
  return map_unary({UnaryKind::kNegate}, x);
}
template <class T>
BasicVar<T> scale(const BasicVar<T>& x, double c) {
  return map_unary({UnaryKind::kScale, c}, x);
}
template <class T>
BasicVar<T> add_scalar(const BasicVar<T>& x, double c) {
  return map_unary({UnaryKind::kAddScalar, c}, x);
}
template <class T>
BasicVar<T> abs(const BasicVar<T>& x) {
  return map_unary({UnaryKind::kAbs}, x);
}
template <class T>
BasicVar<T> clamp(const BasicVar<T>& x, double lo, double hi) {
  return map_unary({UnaryKind::kClamp, lo, hi}, x);
}
template <class T>
BasicVar<T> operator+(const BasicVar<T>& a, const BasicVar<T>& b) {
  return zip_binary(BinaryKind::kAdd, a, b);
}
template <class T>
BasicVar<T> operator-(const BasicVar<T>& a, const BasicVar<T>& b) {
  return zip_binary(BinaryKind::kSub, a, b);
}
template <class T>
BasicVar<T> operator*(const BasicVar<T>& a, const BasicVar<T>& b) {
  return zip_binary(BinaryKind::kMul, a, b);
}
template <class T>
BasicVar<T> operator/(const BasicVar<T>& a, const BasicVar<T>& b) {
  return zip_binary(BinaryKind::kDiv, a, b);
}
template <class T>
BasicVar<T> sum(const BasicVar<T>& x,
                std::optional<std::vector<std::size_t>> axes = std::nullopt) {
  return reduce(ReduceKind::kSum, x, std::move(axes));
}
template <class T>
BasicVar<T> mean(const BasicVar<T>& x,
                 std::optional<std::vector<std::size_t>> axes = std::nullopt) {
  return reduce(ReduceKind::kMean, x, std::move(axes));
}

/// x [N, in] times w [out, in] transposed, plus b [out].
template <class T>
BasicVar<T> linear(const BasicVar<T>& x, const BasicVar<T>& w,
                   const BasicVar<T>& b) {
  return add_bias(matmul(x, transpose(w)), b);
}

/// Output extent of conv2d along one spatial axis; throws DimensionError when
/// it would be < 1.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, std::size_t padding);

/// Output extent of conv2d_transpose along one spatial axis.
std::size_t conv_transpose_output_extent(std::size_t in, std::size_t kernel,
                                         std::size_t stride,
                                         std::size_t padding);

}  // namespace dsvae::ad
