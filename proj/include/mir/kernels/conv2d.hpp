#pragma once

#include "mir/common.hpp"

namespace mir::kernels {

// Conv geometry for NHWC data and [kh, kw, cin/groups, cout] weights.
struct Conv2dSpec {
  i64 n = 1;
  i64 h = 0, w = 0;
  i64 cin = 0, cout = 0;
  i64 kh = 0, kw = 0;
  i64 stride = 1;
  i64 pad = 0;
  i64 groups = 1;

  i64 out_h() const { return (h + 2 * pad - kh) / stride + 1; }
  i64 out_w() const { return (w + 2 * pad - kw) / stride + 1; }
  i64 cin_per_group() const { return cin / groups; }
  i64 cout_per_group() const { return cout / groups; }
  void validate() const;
};

// y[n,oh,ow,cout]; bias may be null.
template <typename T>
void conv2d_forward_serial(const Conv2dSpec& s, const T* x, const T* w, const T* bias, T* y);
template <typename T>
void conv2d_forward_omp(const Conv2dSpec& s, const T* x, const T* w, const T* bias, T* y);
template <typename T>
void conv2d_forward(const Conv2dSpec& s, const T* x, const T* w, const T* bias, T* y);

// dx[n,h,w,cin] += is NOT used: buffers are written, caller accumulates.
template <typename T>
void conv2d_dinput_serial(const Conv2dSpec& s, const T* gy, const T* w, T* dx);
template <typename T>
void conv2d_dinput_omp(const Conv2dSpec& s, const T* gy, const T* w, T* dx);
template <typename T>
void conv2d_dinput(const Conv2dSpec& s, const T* gy, const T* w, T* dx);

template <typename T>
void conv2d_dweight_serial(const Conv2dSpec& s, const T* gy, const T* x, T* dw);
template <typename T>
void conv2d_dweight_omp(const Conv2dSpec& s, const T* gy, const T* x, T* dw);
template <typename T>
void conv2d_dweight(const Conv2dSpec& s, const T* gy, const T* x, T* dw);

template <typename T>
void conv2d_dbias(const Conv2dSpec& s, const T* gy, T* db);

// Plain matrix product with optional transposes: C = op(A) * op(B),
// op(A) is [m,k], op(B) is [k,n]. Gather form, deterministic.
template <typename T>
void gemm_serial(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, const T* a, const T* b, T* c);
template <typename T>
void gemm_omp(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, const T* a, const T* b, T* c);
template <typename T>
void gemm(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, const T* a, const T* b, T* c);

}  // namespace mir::kernels
