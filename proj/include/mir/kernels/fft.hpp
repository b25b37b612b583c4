#pragma once

#include "mir/common.hpp"

namespace mir::kernels {

// In-place radix-2 transform of one complex line. re/im are separate arrays
// of length n; n must be a power of two. No scaling is applied here.
template <typename T>
void fft1d_inplace(T* re, T* im, i64 n, bool inverse);

// Orthonormal 2D transform of an [h, w, 2] interleaved complex image
// (trailing channel pair is re, im). Both directions scale by 1/sqrt(h*w),
// so ifft2(fft2(x)) == x up to rounding. h and w must be powers of two.
template <typename T>
void fft2_serial(const T* x, T* y, i64 h, i64 w, bool inverse);
template <typename T>
void fft2_omp(const T* x, T* y, i64 h, i64 w, bool inverse);
template <typename T>
void fft2(const T* x, T* y, i64 h, i64 w, bool inverse);

}  // namespace mir::kernels
