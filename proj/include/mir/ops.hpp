#pragma once

#include <vector>

#include "mir/tensor.hpp"

namespace mir::ops {

// Elementwise arithmetic. Operands must share a shape, except that either
// side may be a single-element tensor, which broadcasts against the other.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> neg(const Tensor<T>& x);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T c);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T c);

// a is [m, k], b is [k, n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x is [..., in], w is [in, out], bias is [out] or empty handle.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

// x is [h, w, cin], weight is [kh, kw, cin/groups, cout], bias [cout] or
// empty. Depth-wise convolution is groups == cin with cout == cin.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, i64 stride,
                 i64 pad, i64 groups);

// [h, w, c*r*r] -> [h*r, w*r, c] subpixel rearrangement and its inverse.
template <typename T> Tensor<T> depth_to_space(const Tensor<T>& x, i64 r);
template <typename T> Tensor<T> space_to_depth(const Tensor<T>& x, i64 r);

// Normalizes over the last axis. Rows whose variance falls below 1e-12
// normalize to zero before the affine part.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta);

template <typename T> Tensor<T> silu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> softplus(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

// Full reductions to a single-element tensor.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

template <typename T> Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, i64 axis);
template <typename T> Tensor<T> slice(const Tensor<T>& x, i64 axis, i64 start, i64 len);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<i64>& perm);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);

// x is [l, c]; out[i, :] = x[idx[i], :]. Backward scatter-adds rows, so
// repeated indices accumulate.
template <typename T> Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<i64>& idx);

// Orthonormal 2D Fourier transform of an [h, w, 2] real-pair image. The
// backward rule is the opposite-direction transform (conjugate transpose of
// a unitary map is its inverse).
template <typename T> Tensor<T> fft2(const Tensor<T>& x);
template <typename T> Tensor<T> ifft2(const Tensor<T>& x);

// Copies values out of the graph; gradients stop here.
template <typename T> Tensor<T> detach(const Tensor<T>& x);

}  // namespace mir::ops
