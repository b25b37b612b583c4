#include "mir/kernels/radon.hpp"

#include <cmath>
#include <vector>

#include "mir/kernels/fft.hpp"
#include "mir/par.hpp"

namespace mir::kernels {

void CtGeom::validate() const {
  if (h <= 0 || w <= 0 || n_views <= 0 || n_det <= 0) {
    throw ShapeError("radon: non-positive geometry");
  }
  if (det_pitch <= 0.0 || step <= 0.0) throw ShapeError("radon: non-positive spacing");
  if (dist_source_center <= 0.0 || dist_source_detector <= dist_source_center) {
    throw ShapeError("radon: detector must lie beyond the rotation center");
  }
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct RaySpec {
  bool hit = false;
  double ox = 0.0, oy = 0.0;  // entry point, physical coords
  double dx = 0.0, dy = 0.0;  // unit direction
  double dt = 0.0;
  i64 k = 0;
};

// All ray geometry is evaluated in double for both element types so the
// sample positions are identical and the adjoint reuses them exactly.
RaySpec make_ray(const CtGeom& g, i64 v, i64 t) {
  const double beta = 2.0 * kPi * (double)v / (double)g.n_views;
  const double ux = std::cos(beta), uy = std::sin(beta);
  const double ex = uy, ey = -ux;  // detector axis
  const double sx = g.dist_source_center * ux;
  const double sy = g.dist_source_center * uy;
  const double s = ((double)t - ((double)g.n_det - 1.0) / 2.0) * g.det_pitch;
  // Detector element position relative to the source.
  const double rx = g.dist_source_detector * -ux + s * ex;
  const double ry = g.dist_source_detector * -uy + s * ey;
  const double rlen = std::sqrt(rx * rx + ry * ry);
  RaySpec r;
  r.dx = rx / rlen;
  r.dy = ry / rlen;
  // Slab intersection with the pixel grid's bounding box.
  const double hx = (double)g.w / 2.0, hy = (double)g.h / 2.0;
  double t0 = 0.0, t1 = rlen;
  const double eps = 1e-12;
  if (std::abs(r.dx) < eps) {
    if (sx < -hx || sx > hx) return r;
  } else {
    double ta = (-hx - sx) / r.dx, tb = (hx - sx) / r.dx;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (std::abs(r.dy) < eps) {
    if (sy < -hy || sy > hy) return r;
  } else {
    double ta = (-hy - sy) / r.dy, tb = (hy - sy) / r.dy;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 <= t0) return r;
  const double len = t1 - t0;
  r.k = (i64)std::ceil(len / g.step);
  if (r.k < 1) r.k = 1;
  r.dt = len / (double)r.k;
  r.ox = sx + t0 * r.dx;
  r.oy = sy + t0 * r.dy;
  r.hit = true;
  return r;
}

template <typename T>
double gather_ray(const CtGeom& g, const T* img, const RaySpec& r) {
  const double cx = ((double)g.w - 1.0) / 2.0;
  const double cy = ((double)g.h - 1.0) / 2.0;
  double acc = 0.0;
  for (i64 k = 0; k < r.k; ++k) {
    const double tmid = ((double)k + 0.5) * r.dt;
    const double px = r.ox + tmid * r.dx + cx;
    const double py = r.oy + tmid * r.dy + cy;
    const double fx = std::floor(px), fy = std::floor(py);
    const i64 x0 = (i64)fx, y0 = (i64)fy;
    const double wx = px - fx, wy = py - fy;
    for (int dy = 0; dy < 2; ++dy) {
      const i64 yy = y0 + dy;
      if (yy < 0 || yy >= g.h) continue;
      const double wyv = dy ? wy : 1.0 - wy;
      for (int dx = 0; dx < 2; ++dx) {
        const i64 xx = x0 + dx;
        if (xx < 0 || xx >= g.w) continue;
        const double wxv = dx ? wx : 1.0 - wx;
        acc += (double)img[yy * g.w + xx] * (wyv * wxv);
      }
    }
  }
  return acc * r.dt;
}

template <typename T>
void scatter_ray(const CtGeom& g, T* img, const RaySpec& r, double gval) {
  const double cx = ((double)g.w - 1.0) / 2.0;
  const double cy = ((double)g.h - 1.0) / 2.0;
  const double gdt = gval * r.dt;
  for (i64 k = 0; k < r.k; ++k) {
    const double tmid = ((double)k + 0.5) * r.dt;
    const double px = r.ox + tmid * r.dx + cx;
    const double py = r.oy + tmid * r.dy + cy;
    const double fx = std::floor(px), fy = std::floor(py);
    const i64 x0 = (i64)fx, y0 = (i64)fy;
    const double wx = px - fx, wy = py - fy;
    for (int dy = 0; dy < 2; ++dy) {
      const i64 yy = y0 + dy;
      if (yy < 0 || yy >= g.h) continue;
      const double wyv = dy ? wy : 1.0 - wy;
      for (int dx = 0; dx < 2; ++dx) {
        const i64 xx = x0 + dx;
        if (xx < 0 || xx >= g.w) continue;
        const double wxv = dx ? wx : 1.0 - wx;
        img[yy * g.w + xx] += (T)(gdt * wyv * wxv);
      }
    }
  }
}

template <typename T>
void forward_view(const CtGeom& g, const T* img, T* sino, i64 v) {
  for (i64 t = 0; t < g.n_det; ++t) {
    const RaySpec r = make_ray(g, v, t);
    sino[v * g.n_det + t] = r.hit ? (T)gather_ray(g, img, r) : T(0);
  }
}

template <typename T>
void adjoint_view(const CtGeom& g, const T* sino, T* buf, i64 v) {
  for (i64 t = 0; t < g.n_det; ++t) {
    const RaySpec r = make_ray(g, v, t);
    if (!r.hit) continue;
    scatter_ray(g, buf, r, (double)sino[v * g.n_det + t]);
  }
}

}  // namespace

template <typename T>
void radon_forward_serial(const CtGeom& g, const T* img, T* sino) {
  g.validate();
  for (i64 v = 0; v < g.n_views; ++v) forward_view(g, img, sino, v);
}

template <typename T>
void radon_forward_omp(const CtGeom& g, const T* img, T* sino) {
  g.validate();
#pragma omp parallel for schedule(static)
  for (i64 v = 0; v < g.n_views; ++v) forward_view(g, img, sino, v);
}

template <typename T>
void radon_forward(const CtGeom& g, const T* img, T* sino) {
  if (par::omp_enabled()) {
    radon_forward_omp(g, img, sino);
  } else {
    radon_forward_serial(g, img, sino);
  }
}

// Views are staged into a bounded set of private images and reduced in
// ascending view order; the serial variant keeps the same structure so both
// paths round identically.
static constexpr i64 kAdjointChunk = 8;

template <typename T>
void radon_adjoint_serial(const CtGeom& g, const T* sino, T* img) {
  g.validate();
  const i64 hw = g.h * g.w;
  for (i64 i = 0; i < hw; ++i) img[i] = T(0);
  std::vector<T> bufs((size_t)(kAdjointChunk * hw));
  for (i64 base = 0; base < g.n_views; base += kAdjointChunk) {
    const i64 m = std::min(kAdjointChunk, g.n_views - base);
    for (i64 i = 0; i < m * hw; ++i) bufs[(size_t)i] = T(0);
    for (i64 vv = 0; vv < m; ++vv) {
      adjoint_view(g, sino, bufs.data() + vv * hw, base + vv);
    }
    for (i64 i = 0; i < hw; ++i) {
      T acc = img[i];
      for (i64 vv = 0; vv < m; ++vv) acc += bufs[(size_t)(vv * hw + i)];
      img[i] = acc;
    }
  }
}

template <typename T>
void radon_adjoint_omp(const CtGeom& g, const T* sino, T* img) {
  g.validate();
  const i64 hw = g.h * g.w;
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < hw; ++i) img[i] = T(0);
  std::vector<T> bufs((size_t)(kAdjointChunk * hw));
  for (i64 base = 0; base < g.n_views; base += kAdjointChunk) {
    const i64 m = std::min(kAdjointChunk, g.n_views - base);
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < m * hw; ++i) bufs[(size_t)i] = T(0);
#pragma omp parallel for schedule(static)
    for (i64 vv = 0; vv < m; ++vv) {
      adjoint_view(g, sino, bufs.data() + vv * hw, base + vv);
    }
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < hw; ++i) {
      T acc = img[i];
      for (i64 vv = 0; vv < m; ++vv) acc += bufs[(size_t)(vv * hw + i)];
      img[i] = acc;
    }
  }
}

template <typename T>
void radon_adjoint(const CtGeom& g, const T* sino, T* img) {
  if (par::omp_enabled()) {
    radon_adjoint_omp(g, sino, img);
  } else {
    radon_adjoint_serial(g, sino, img);
  }
}

namespace {

// Ramp filter response on a zero-padded grid of length p (power of two),
// optionally Hann tapered. Returned as the kernel's DFT.
void ramp_response(i64 n_det, i64 p, double dv, bool hann, std::vector<double>& fre,
                   std::vector<double>& fim) {
  std::vector<double> hk((size_t)p, 0.0);
  hk[0] = 1.0 / (4.0 * dv * dv);
  for (i64 m = 1; m < n_det; ++m) {
    double val = 0.0;
    if (m % 2 == 1) {
      const double d = kPi * (double)m * dv;
      val = -1.0 / (d * d);
    }
    hk[(size_t)m] = val;
    hk[(size_t)(p - m)] = val;
  }
  fre.assign((size_t)p, 0.0);
  fim.assign((size_t)p, 0.0);
  for (i64 i = 0; i < p; ++i) fre[(size_t)i] = hk[(size_t)i];
  fft1d_inplace(fre.data(), fim.data(), p, false);
  if (hann) {
    for (i64 k = 0; k < p; ++k) {
      const double f = (double)std::min(k, p - k) / (double)p;  // in [0, 0.5]
      const double taper = 0.5 * (1.0 + std::cos(2.0 * kPi * f));
      fre[(size_t)k] *= taper;
      fim[(size_t)k] *= taper;
    }
  }
}

void filter_view(const double* proj, i64 n_det, i64 p, double dso, double dv,
                 const std::vector<double>& fre, const std::vector<double>& fim, double* out) {
  std::vector<double> re((size_t)p, 0.0), im((size_t)p, 0.0);
  for (i64 t = 0; t < n_det; ++t) {
    const double sv = ((double)t - ((double)n_det - 1.0) / 2.0) * dv;
    re[(size_t)t] = proj[t] * dso / std::sqrt(dso * dso + sv * sv);
  }
  fft1d_inplace(re.data(), im.data(), p, false);
  for (i64 k = 0; k < p; ++k) {
    const double rr = re[(size_t)k] * fre[(size_t)k] - im[(size_t)k] * fim[(size_t)k];
    const double ii = re[(size_t)k] * fim[(size_t)k] + im[(size_t)k] * fre[(size_t)k];
    re[(size_t)k] = rr;
    im[(size_t)k] = ii;
  }
  fft1d_inplace(re.data(), im.data(), p, true);
  // Unscaled transform pair needs 1/p; dv is the convolution quadrature step.
  const double scale = dv / (double)p;
  for (i64 t = 0; t < n_det; ++t) out[t] = re[(size_t)t] * scale;
}

double backproject_pixel(const CtGeom& g, const std::vector<double>& filt, i64 i, i64 j) {
  const double x = (double)j - ((double)g.w - 1.0) / 2.0;
  const double y = (double)i - ((double)g.h - 1.0) / 2.0;
  const double dso = g.dist_source_center;
  const double dv = g.virtual_pitch();
  double acc = 0.0;
  for (i64 v = 0; v < g.n_views; ++v) {
    const double beta = 2.0 * kPi * (double)v / (double)g.n_views;
    const double ux = std::cos(beta), uy = std::sin(beta);
    const double uw = (dso - (x * ux + y * uy)) / dso;
    if (uw <= 1e-9) continue;
    const double sv = (x * uy - y * ux) / uw;  // along the detector axis
    const double q = sv / dv + ((double)g.n_det - 1.0) / 2.0;
    const double fq = std::floor(q);
    const i64 t0 = (i64)fq;
    if (t0 < 0 || t0 + 1 >= g.n_det) continue;
    const double frac = q - fq;
    const double val =
        filt[(size_t)(v * g.n_det + t0)] * (1.0 - frac) + filt[(size_t)(v * g.n_det + t0 + 1)] * frac;
    acc += val / (uw * uw);
  }
  return acc * kPi / (double)g.n_views;
}

template <typename T>
void fbp_impl(const CtGeom& g, const T* sino, T* img, bool hann, bool parallel) {
  g.validate();
  i64 p = 2;
  while (p < 2 * g.n_det) p <<= 1;
  const double dv = g.virtual_pitch();
  std::vector<double> fre, fim;
  ramp_response(g.n_det, p, dv, hann, fre, fim);
  std::vector<double> filt((size_t)(g.n_views * g.n_det));
  if (parallel) {
#pragma omp parallel
    {
      std::vector<double> proj((size_t)g.n_det);
#pragma omp for schedule(static)
      for (i64 v = 0; v < g.n_views; ++v) {
        for (i64 t = 0; t < g.n_det; ++t) proj[(size_t)t] = (double)sino[v * g.n_det + t];
        filter_view(proj.data(), g.n_det, p, g.dist_source_center, dv, fre, fim,
                    filt.data() + v * g.n_det);
      }
    }
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < g.h; ++i) {
      for (i64 j = 0; j < g.w; ++j) {
        img[i * g.w + j] = (T)backproject_pixel(g, filt, i, j);
      }
    }
  } else {
    std::vector<double> proj((size_t)g.n_det);
    for (i64 v = 0; v < g.n_views; ++v) {
      for (i64 t = 0; t < g.n_det; ++t) proj[(size_t)t] = (double)sino[v * g.n_det + t];
      filter_view(proj.data(), g.n_det, p, g.dist_source_center, dv, fre, fim,
                  filt.data() + v * g.n_det);
    }
    for (i64 i = 0; i < g.h; ++i) {
      for (i64 j = 0; j < g.w; ++j) {
        img[i * g.w + j] = (T)backproject_pixel(g, filt, i, j);
      }
    }
  }
}

}  // namespace

template <typename T>
void fbp_serial(const CtGeom& g, const T* sino, T* img, bool hann) {
  fbp_impl(g, sino, img, hann, false);
}

template <typename T>
void fbp_omp(const CtGeom& g, const T* sino, T* img, bool hann) {
  fbp_impl(g, sino, img, hann, true);
}

template <typename T>
void fbp(const CtGeom& g, const T* sino, T* img, bool hann) {
  fbp_impl(g, sino, img, hann, par::omp_enabled());
}

#define MIR_INSTANTIATE_RADON(T)                                \
  template void radon_forward_serial<T>(const CtGeom&, const T*, T*); \
  template void radon_forward_omp<T>(const CtGeom&, const T*, T*);    \
  template void radon_forward<T>(const CtGeom&, const T*, T*);        \
  template void radon_adjoint_serial<T>(const CtGeom&, const T*, T*); \
  template void radon_adjoint_omp<T>(const CtGeom&, const T*, T*);    \
  template void radon_adjoint<T>(const CtGeom&, const T*, T*);        \
  template void fbp_serial<T>(const CtGeom&, const T*, T*, bool);     \
  template void fbp_omp<T>(const CtGeom&, const T*, T*, bool);        \
  template void fbp<T>(const CtGeom&, const T*, T*, bool);

MIR_INSTANTIATE_RADON(float)
MIR_INSTANTIATE_RADON(double)

#undef MIR_INSTANTIATE_RADON

}  // namespace mir::kernels
