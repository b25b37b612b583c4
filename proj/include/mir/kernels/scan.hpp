#pragma once

#include "mir/common.hpp"

namespace mir::kernels {

// Dimensions of one selective-scan call. Sequences are [l, c] row-major,
// per-token state projections b and c_in are [l, n], the state transition a
// is [c, n], and the skip d is [c]. delta is the already-positive step size
// per token per channel.
struct ScanDims {
  i64 l = 0;
  i64 c = 0;
  i64 n = 0;
  // false: b_bar = delta * b (first-order hold).
  // true:  b_bar = (exp(delta * a) - 1) / a * b (exact zero-order hold).
  bool exact_bbar = false;
};

// h_out is [l, c, n]; it holds every post-update state and is what the
// backward pass consumes. y is [l, c].
template <typename T>
void selective_scan_forward_serial(const ScanDims& d, const T* u, const T* delta, const T* a,
                                   const T* b, const T* c_in, const T* skip, T* y, T* h_out);
template <typename T>
void selective_scan_forward_omp(const ScanDims& d, const T* u, const T* delta, const T* a,
                                const T* b, const T* c_in, const T* skip, T* y, T* h_out);
template <typename T>
void selective_scan_forward(const ScanDims& d, const T* u, const T* delta, const T* a, const T* b,
                            const T* c_in, const T* skip, T* y, T* h_out);

// Reverse sweep over the recurrence. All six gradient buffers are written,
// not accumulated. gb and gc sum contributions across channels; both paths
// reduce per-channel scratch in ascending channel order so the serial and
// parallel results match bitwise.
template <typename T>
void selective_scan_backward_serial(const ScanDims& d, const T* u, const T* delta, const T* a,
                                    const T* b, const T* c_in, const T* skip, const T* h,
                                    const T* gy, T* gu, T* gdelta, T* ga, T* gb, T* gc, T* gskip);
template <typename T>
void selective_scan_backward_omp(const ScanDims& d, const T* u, const T* delta, const T* a,
                                 const T* b, const T* c_in, const T* skip, const T* h, const T* gy,
                                 T* gu, T* gdelta, T* ga, T* gb, T* gc, T* gskip);
template <typename T>
void selective_scan_backward(const ScanDims& d, const T* u, const T* delta, const T* a, const T* b,
                             const T* c_in, const T* skip, const T* h, const T* gy, T* gu,
                             T* gdelta, T* ga, T* gb, T* gc, T* gskip);

}  // namespace mir::kernels
