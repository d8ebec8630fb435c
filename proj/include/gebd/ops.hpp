#pragma once

#include <span>
#include <vector>

#include "gebd/tensor.hpp"

namespace gebd {

// Elementwise. `b` may equal `a` in shape or match a trailing suffix of it,
// in which case it is broadcast over the leading dimensions (bias and
// positional-embedding adds).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Batched product over the last two axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[..., in] * w[in, out] + bias[out]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps = 1e-5f);

/// x[B, Cin, T], w[Cout, Cin, k], bias[Cout] (optional). Stride 1, zero
/// same-padding, cross-correlation.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias = {});
/// x[B, Cin, H, W], w[Cout, Cin, k, k], bias[Cout] (optional).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias = {});

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean over the listed axes, which are removed from the result.
Tensor mean(const Tensor& x, std::vector<int> axes);

/// Shares storage with `x`.
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, std::vector<std::size_t> order);
Tensor transpose(const Tensor& x, int axis_a, int axis_b);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Contiguous sub-range [start, start+length) along `axis`.
Tensor narrow(const Tensor& x, int axis, std::size_t start, std::size_t length);

} // namespace gebd
