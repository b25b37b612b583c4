#include "mir/kernels/conv2d.hpp"

#include "mir/par.hpp"

namespace mir::kernels {

void Conv2dSpec::validate() const {
  if (n <= 0 || h <= 0 || w <= 0 || cin <= 0 || cout <= 0) {
    throw ShapeError("conv2d: non-positive dimensions");
  }
  if (kh <= 0 || kw <= 0 || stride <= 0 || pad < 0) {
    throw ShapeError("conv2d: bad kernel geometry");
  }
  if (groups <= 0 || cin % groups != 0 || cout % groups != 0) {
    throw ShapeError("conv2d: groups must divide cin and cout");
  }
  if (out_h() <= 0 || out_w() <= 0) {
    throw ShapeError("conv2d: empty output");
  }
}

// One output element = one fixed-order sum over (kh, kw, cin_g). The omp
// variant splits the outer rows across threads; per-element arithmetic is
// identical, so both paths agree bitwise.
template <typename T>
static inline T conv_pixel(const Conv2dSpec& s, const T* x, const T* w, i64 in, i64 oh, i64 ow,
                           i64 oc) {
  const i64 cg = s.cin_per_group();
  const i64 og = s.cout_per_group();
  const i64 g = oc / og;
  T acc = T(0);
  for (i64 ky = 0; ky < s.kh; ++ky) {
    const i64 iy = oh * s.stride + ky - s.pad;
    if (iy < 0 || iy >= s.h) continue;
    for (i64 kx = 0; kx < s.kw; ++kx) {
      const i64 ix = ow * s.stride + kx - s.pad;
      if (ix < 0 || ix >= s.w) continue;
      const T* xp = x + ((in * s.h + iy) * s.w + ix) * s.cin + g * cg;
      const T* wp = w + ((ky * s.kw + kx) * cg) * s.cout + oc;
      for (i64 c = 0; c < cg; ++c) {
        acc += xp[c] * wp[c * s.cout];
      }
    }
  }
  return acc;
}

template <typename T>
void conv2d_forward_serial(const Conv2dSpec& s, const T* x, const T* w, const T* bias, T* y) {
  const i64 oh = s.out_h(), ow = s.out_w();
  for (i64 idx = 0; idx < s.n * oh; ++idx) {
    const i64 in = idx / oh, r = idx % oh;
    for (i64 c = 0; c < ow; ++c) {
      for (i64 oc = 0; oc < s.cout; ++oc) {
        T v = conv_pixel(s, x, w, in, r, c, oc);
        if (bias) v += bias[oc];
        y[((in * oh + r) * ow + c) * s.cout + oc] = v;
      }
    }
  }
}

template <typename T>
void conv2d_forward_omp(const Conv2dSpec& s, const T* x, const T* w, const T* bias, T* y) {
  const i64 oh = s.out_h(), ow = s.out_w();
#pragma omp parallel for schedule(static)
  for (i64 idx = 0; idx < s.n * oh; ++idx) {
    const i64 in = idx / oh, r = idx % oh;
    for (i64 c = 0; c < ow; ++c) {
      for (i64 oc = 0; oc < s.cout; ++oc) {
        T v = conv_pixel(s, x, w, in, r, c, oc);
        if (bias) v += bias[oc];
        y[((in * oh + r) * ow + c) * s.cout + oc] = v;
      }
    }
  }
}

template <typename T>
void conv2d_forward(const Conv2dSpec& s, const T* x, const T* w, const T* bias, T* y) {
  s.validate();
  if (par::omp_enabled()) {
    conv2d_forward_omp(s, x, w, bias, y);
  } else {
    conv2d_forward_serial(s, x, w, bias, y);
  }
}

// Gather form over input pixels: for each (iy, ix, ic) collect every output
// position whose window covers it.
template <typename T>
static inline T dinput_pixel(const Conv2dSpec& s, const T* gy, const T* w, i64 in, i64 iy, i64 ix,
                             i64 ic) {
  const i64 oh = s.out_h(), ow = s.out_w();
  const i64 cg = s.cin_per_group();
  const i64 og = s.cout_per_group();
  const i64 g = ic / cg;
  const i64 cl = ic % cg;
  T acc = T(0);
  for (i64 ky = 0; ky < s.kh; ++ky) {
    const i64 num_y = iy + s.pad - ky;
    if (num_y < 0 || num_y % s.stride != 0) continue;
    const i64 r = num_y / s.stride;
    if (r >= oh) continue;
    for (i64 kx = 0; kx < s.kw; ++kx) {
      const i64 num_x = ix + s.pad - kx;
      if (num_x < 0 || num_x % s.stride != 0) continue;
      const i64 c = num_x / s.stride;
      if (c >= ow) continue;
      const T* gp = gy + ((in * oh + r) * ow + c) * s.cout + g * og;
      const T* wp = w + ((ky * s.kw + kx) * cg + cl) * s.cout + g * og;
      for (i64 oc = 0; oc < og; ++oc) {
        acc += gp[oc] * wp[oc];
      }
    }
  }
  return acc;
}

template <typename T>
void conv2d_dinput_serial(const Conv2dSpec& s, const T* gy, const T* w, T* dx) {
  for (i64 idx = 0; idx < s.n * s.h; ++idx) {
    const i64 in = idx / s.h, iy = idx % s.h;
    for (i64 ix = 0; ix < s.w; ++ix) {
      for (i64 ic = 0; ic < s.cin; ++ic) {
        dx[((in * s.h + iy) * s.w + ix) * s.cin + ic] = dinput_pixel(s, gy, w, in, iy, ix, ic);
      }
    }
  }
}

template <typename T>
void conv2d_dinput_omp(const Conv2dSpec& s, const T* gy, const T* w, T* dx) {
#pragma omp parallel for schedule(static)
  for (i64 idx = 0; idx < s.n * s.h; ++idx) {
    const i64 in = idx / s.h, iy = idx % s.h;
    for (i64 ix = 0; ix < s.w; ++ix) {
      for (i64 ic = 0; ic < s.cin; ++ic) {
        dx[((in * s.h + iy) * s.w + ix) * s.cin + ic] = dinput_pixel(s, gy, w, in, iy, ix, ic);
      }
    }
  }
}

template <typename T>
void conv2d_dinput(const Conv2dSpec& s, const T* gy, const T* w, T* dx) {
  if (par::omp_enabled()) {
    conv2d_dinput_omp(s, gy, w, dx);
  } else {
    conv2d_dinput_serial(s, gy, w, dx);
  }
}

// Gather form over weight entries: each (ky, kx, cl, oc) is a fixed-order sum
// over (n, oh, ow).
template <typename T>
static inline T dweight_entry(const Conv2dSpec& s, const T* gy, const T* x, i64 ky, i64 kx, i64 cl,
                              i64 oc) {
  const i64 oh = s.out_h(), ow = s.out_w();
  const i64 cg = s.cin_per_group();
  const i64 og = s.cout_per_group();
  const i64 g = oc / og;
  const i64 ic = g * cg + cl;
  T acc = T(0);
  for (i64 in = 0; in < s.n; ++in) {
    for (i64 r = 0; r < oh; ++r) {
      const i64 iy = r * s.stride + ky - s.pad;
      if (iy < 0 || iy >= s.h) continue;
      for (i64 c = 0; c < ow; ++c) {
        const i64 ix = c * s.stride + kx - s.pad;
        if (ix < 0 || ix >= s.w) continue;
        acc += gy[((in * oh + r) * ow + c) * s.cout + oc] *
               x[((in * s.h + iy) * s.w + ix) * s.cin + ic];
      }
    }
  }
  return acc;
}

template <typename T>
void conv2d_dweight_serial(const Conv2dSpec& s, const T* gy, const T* x, T* dw) {
  const i64 cg = s.cin_per_group();
  const i64 wn = s.kh * s.kw * cg * s.cout;
  for (i64 widx = 0; widx < wn; ++widx) {
    const i64 oc = widx % s.cout;
    const i64 cl = (widx / s.cout) % cg;
    const i64 kx = (widx / (s.cout * cg)) % s.kw;
    const i64 ky = widx / (s.cout * cg * s.kw);
    dw[widx] = dweight_entry(s, gy, x, ky, kx, cl, oc);
  }
}

template <typename T>
void conv2d_dweight_omp(const Conv2dSpec& s, const T* gy, const T* x, T* dw) {
  const i64 cg = s.cin_per_group();
  const i64 wn = s.kh * s.kw * cg * s.cout;
#pragma omp parallel for schedule(static)
  for (i64 widx = 0; widx < wn; ++widx) {
    const i64 oc = widx % s.cout;
    const i64 cl = (widx / s.cout) % cg;
    const i64 kx = (widx / (s.cout * cg)) % s.kw;
    const i64 ky = widx / (s.cout * cg * s.kw);
    dw[widx] = dweight_entry(s, gy, x, ky, kx, cl, oc);
  }
}

template <typename T>
void conv2d_dweight(const Conv2dSpec& s, const T* gy, const T* x, T* dw) {
  if (par::omp_enabled()) {
    conv2d_dweight_omp(s, gy, x, dw);
  } else {
    conv2d_dweight_serial(s, gy, x, dw);
  }
}

template <typename T>
void conv2d_dbias(const Conv2dSpec& s, const T* gy, T* db) {
  const i64 oh = s.out_h(), ow = s.out_w();
  for (i64 oc = 0; oc < s.cout; ++oc) db[oc] = T(0);
  for (i64 i = 0; i < s.n * oh * ow; ++i) {
    for (i64 oc = 0; oc < s.cout; ++oc) {
      db[oc] += gy[i * s.cout + oc];
    }
  }
}

template <typename T>
static inline T gemm_cell(bool ta, bool tb, i64 m, i64 n, i64 k, const T* a, const T* b, i64 i,
                          i64 j) {
  (void)m;
  T acc = T(0);
  for (i64 p = 0; p < k; ++p) {
    const T av = ta ? a[p * m + i] : a[i * k + p];
    const T bv = tb ? b[j * k + p] : b[p * n + j];
    acc += av * bv;
  }
  return acc;
}

template <typename T>
void gemm_serial(bool ta, bool tb, i64 m, i64 n, i64 k, const T* a, const T* b, T* c) {
  for (i64 i = 0; i < m; ++i) {
    for (i64 j = 0; j < n; ++j) {
      c[i * n + j] = gemm_cell(ta, tb, m, n, k, a, b, i, j);
    }
  }
}

template <typename T>
void gemm_omp(bool ta, bool tb, i64 m, i64 n, i64 k, const T* a, const T* b, T* c) {
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < m; ++i) {
    for (i64 j = 0; j < n; ++j) {
      c[i * n + j] = gemm_cell(ta, tb, m, n, k, a, b, i, j);
    }
  }
}

template <typename T>
void gemm(bool ta, bool tb, i64 m, i64 n, i64 k, const T* a, const T* b, T* c) {
  if (m <= 0 || n <= 0 || k <= 0) throw ShapeError("gemm: non-positive dimensions");
  if (par::omp_enabled()) {
    gemm_omp(ta, tb, m, n, k, a, b, c);
  } else {
    gemm_serial(ta, tb, m, n, k, a, b, c);
  }
}

#define MIR_INSTANTIATE_CONV(T)                                                                  \
  template void conv2d_forward_serial<T>(const Conv2dSpec&, const T*, const T*, const T*, T*);   \
  template void conv2d_forward_omp<T>(const Conv2dSpec&, const T*, const T*, const T*, T*);      \
  template void conv2d_forward<T>(const Conv2dSpec&, const T*, const T*, const T*, T*);          \
  template void conv2d_dinput_serial<T>(const Conv2dSpec&, const T*, const T*, T*);              \
  template void conv2d_dinput_omp<T>(const Conv2dSpec&, const T*, const T*, T*);                 \
  template void conv2d_dinput<T>(const Conv2dSpec&, const T*, const T*, T*);                     \
  template void conv2d_dweight_serial<T>(const Conv2dSpec&, const T*, const T*, T*);             \
  template void conv2d_dweight_omp<T>(const Conv2dSpec&, const T*, const T*, T*);                \
  template void conv2d_dweight<T>(const Conv2dSpec&, const T*, const T*, T*);                    \
  template void conv2d_dbias<T>(const Conv2dSpec&, const T*, T*);                                \
  template void gemm_serial<T>(bool, bool, i64, i64, i64, const T*, const T*, T*);               \
  template void gemm_omp<T>(bool, bool, i64, i64, i64, const T*, const T*, T*);                  \
  template void gemm<T>(bool, bool, i64, i64, i64, const T*, const T*, T*);

MIR_INSTANTIATE_CONV(float)
MIR_INSTANTIATE_CONV(double)

#undef MIR_INSTANTIATE_CONV

}  // namespace mir::kernels
