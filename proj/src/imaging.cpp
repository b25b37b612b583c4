#include "mir/imaging.hpp"

#include <algorithm>
#include <cmath>

#include "mir/kernels/fft.hpp"

namespace mir::imaging {

i64 MriSamplingSpec::popcount() const {
  i64 n = 0;
  for (auto v : mask) n += v ? 1 : 0;
  return n;
}

MriSamplingSpec make_cartesian_mask(i64 w, i64 af, double acs_fraction, u64 seed) {
  if (w <= 0) throw ShapeError("make_cartesian_mask: empty width");
  if (af != 1 && af != 4 && af != 8 && af != 16) {
    throw ShapeError(strfmt("make_cartesian_mask: acceleration %lld not in {1,4,8,16}",
                            (long long)af));
  }
  MriSamplingSpec spec;
  spec.af = af;
  spec.seed = seed;
  spec.mask.assign((std::size_t)w, 0);
  if (af == 1) {
    std::fill(spec.mask.begin(), spec.mask.end(), 1);
    spec.acs = std::max<i64>(2, (i64)std::llround(acs_fraction * (double)w));
    return spec;
  }
  const i64 budget = (w + af - 1) / af;  // ceil(w / af)
  const i64 acs = std::max<i64>(2, (i64)std::llround(acs_fraction * (double)w));
  if (budget < acs) {
    throw ShapeError(strfmt("make_cartesian_mask: budget %lld below %lld center lines",
                            (long long)budget, (long long)acs));
  }
  spec.acs = acs;
  const i64 start = w / 2 - acs / 2;
  for (i64 j = start; j < start + acs; ++j) spec.mask[(std::size_t)j] = 1;
  // Draw the remaining lines uniformly without replacement from the
  // complement of the center block.
  std::vector<i64> rest;
  rest.reserve((std::size_t)(w - acs));
  for (i64 j = 0; j < w; ++j) {
    if (!spec.mask[(std::size_t)j]) rest.push_back(j);
  }
  CounterRng rng(StreamKey{seed, fnv1a("cartesian-mask"), (u64)w, (u64)af});
  const i64 extra = budget - acs;
  for (i64 i = 0; i < extra; ++i) {
    const i64 j = i + rng.below((i64)rest.size() - i);
    std::swap(rest[(std::size_t)i], rest[(std::size_t)j]);
    spec.mask[(std::size_t)rest[(std::size_t)i]] = 1;
  }
  return spec;
}

namespace {

// Centered mask index for DFT column m.
inline i64 centered_index(i64 m, i64 w) { return (m + w / 2) % w; }

template <typename T>
Tensor<T> mri_forward_impl(const Tensor<T>& x, const MriSamplingSpec& spec, double noise_sigma,
                           const StreamKey& noise_key) {
  if (x.ndim() != 3 || x.dim(2) != 2) throw ShapeError("mri_forward: input must be [h, w, 2]");
  const i64 h = x.dim(0), w = x.dim(1);
  if (w != spec.width()) {
    throw ShapeError(strfmt("mri_forward: mask width %lld does not match image width %lld",
                            (long long)spec.width(), (long long)w));
  }
  Tensor<T> y = Tensor<T>::zeros(x.shape());
  kernels::fft2(x.data(), y.data(), h, w, false);
  CounterRng rng(noise_key);
  for (i64 i = 0; i < h; ++i) {
    for (i64 m = 0; m < w; ++m) {
      T* cell = y.data() + (i * w + m) * 2;
      if (!spec.mask[(std::size_t)centered_index(m, w)]) {
        cell[0] = T(0);
        cell[1] = T(0);
      } else if (noise_sigma > 0.0) {
        cell[0] += (T)rng.normal(0.0, noise_sigma);
        cell[1] += (T)rng.normal(0.0, noise_sigma);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> mri_zero_fill_impl(const Tensor<T>& y, const MriSamplingSpec& spec) {
  if (y.ndim() != 3 || y.dim(2) != 2) throw ShapeError("mri_zero_fill: input must be [h, w, 2]");
  if (y.dim(1) != spec.width()) throw ShapeError("mri_zero_fill: mask width mismatch");
  Tensor<T> x = Tensor<T>::zeros(y.shape());
  kernels::fft2(y.data(), x.data(), y.dim(0), y.dim(1), true);
  return x;
}

}  // namespace

Tensor<float> mri_forward(const Tensor<float>& x, const MriSamplingSpec& spec, double noise_sigma,
                          const StreamKey& noise_key) {
  return mri_forward_impl(x, spec, noise_sigma, noise_key);
}
Tensor<double> mri_forward(const Tensor<double>& x, const MriSamplingSpec& spec,
                           double noise_sigma, const StreamKey& noise_key) {
  return mri_forward_impl(x, spec, noise_sigma, noise_key);
}
Tensor<float> mri_zero_fill(const Tensor<float>& y, const MriSamplingSpec& spec) {
  return mri_zero_fill_impl(y, spec);
}
Tensor<double> mri_zero_fill(const Tensor<double>& y, const MriSamplingSpec& spec) {
  return mri_zero_fill_impl(y, spec);
}

kernels::CtGeom CtGeometry::to_kernel() const {
  kernels::CtGeom g;
  g.h = image_size;
  g.w = image_size;
  g.n_views = n_views;
  g.n_det = n_detectors;
  // Kernel lengths are in pixel units.
  g.det_pitch = detector_pitch / pixel_pitch;
  g.dist_source_center = source_to_center / pixel_pitch;
  g.dist_source_detector = source_to_detector / pixel_pitch;
  g.step = ray_step;
  return g;
}

CtGeometry desk_ct_geometry(i64 image_size, i64 n_views) {
  if (image_size < 2 || n_views < 1) {
    throw ShapeError(strfmt("desk_ct_geometry: image size %lld, views %lld",
                            (long long)image_size, (long long)n_views));
  }
  CtGeometry geom;
  geom.image_size = image_size;
  geom.n_views = n_views;
  geom.n_detectors = image_size * 3 / 2;
  geom.source_to_center = 2.0 * (double)image_size;
  geom.source_to_detector = 4.0 * (double)image_size;
  // Narrowest row that still sees the image's circumscribed circle from every
  // source position (plus 1%); a wider row wastes detector resolution.
  const double half_diag = (double)image_size * std::sqrt(2.0) / 2.0;
  const double half_fan = std::asin(half_diag / geom.source_to_center);
  const double row_width = 2.0 * geom.source_to_detector * std::tan(half_fan) * 1.01;
  geom.detector_pitch = row_width / (double)geom.n_detectors;
  geom.pixel_pitch = 1.0;
  geom.ray_step = 0.5;
  return geom;
}

namespace {

struct Ellipse {
  double value, a, b, x0, y0, phi;  // half axes and center in [-1, 1] units
};

// The widely used modified intensity table: gray matter near 0.2 against a
// unit skull.
const Ellipse kSheppLogan[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
};

// Each pixel averages a 4x4 grid of coverage samples, so ellipse boundaries
// land as area fractions rather than jagged steps.
constexpr int kCoverageGrid = 4;

void rasterize(Tensor<float>& img, const std::vector<Ellipse>& ellipses) {
  const i64 h = img.dim(0), w = img.dim(1);
  struct Pre {
    double value, inv_a2, inv_b2, x0, y0, ct, st;
  };
  std::vector<Pre> pre;
  pre.reserve(ellipses.size());
  for (const Ellipse& e : ellipses) {
    const double rad = e.phi * 3.14159265358979323846 / 180.0;
    pre.push_back(
        {e.value, 1.0 / (e.a * e.a), 1.0 / (e.b * e.b), e.x0, e.y0, std::cos(rad), std::sin(rad)});
  }
  for (i64 i = 0; i < h; ++i) {
    for (i64 j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int si = 0; si < kCoverageGrid; ++si) {
        const double py = (double)i + ((double)si + 0.5) / kCoverageGrid - 0.5;
        const double y = (py - ((double)h - 1.0) / 2.0) / ((double)h / 2.0);
        for (int sj = 0; sj < kCoverageGrid; ++sj) {
          const double px = (double)j + ((double)sj + 0.5) / kCoverageGrid - 0.5;
          const double x = (px - ((double)w - 1.0) / 2.0) / ((double)w / 2.0);
          double v = 0.0;
          for (const Pre& e : pre) {
            const double dx = x - e.x0, dy = y - e.y0;
            const double u = dx * e.ct + dy * e.st;
            const double t = -dx * e.st + dy * e.ct;
            if (u * u * e.inv_a2 + t * t * e.inv_b2 <= 1.0) v += e.value;
          }
          acc += std::clamp(v, 0.0, 1.0);
        }
      }
      img.data()[i * w + j] = (float)(acc / (double)(kCoverageGrid * kCoverageGrid));
    }
  }
}

}  // namespace

Tensor<float> make_phantom(PhantomKind kind, i64 h, i64 w, u64 seed) {
  if (h < 16 || w < 16) throw ShapeError("make_phantom: extents must be at least 16");
  Tensor<float> img = Tensor<float>::zeros({h, w});
  std::vector<Ellipse> ellipses;
  if (kind == PhantomKind::kSheppLogan) {
    ellipses.assign(std::begin(kSheppLogan), std::end(kSheppLogan));
  } else {
    CounterRng rng(StreamKey{seed, fnv1a("random-ellipses"), 0, 0});
    // One enclosing body plus at least two features.
    Ellipse body;
    body.value = rng.uniform(0.5, 0.9);
    body.a = rng.uniform(0.6, 0.85);
    body.b = rng.uniform(0.6, 0.85);
    body.x0 = rng.uniform(-0.05, 0.05);
    body.y0 = rng.uniform(-0.05, 0.05);
    body.phi = rng.uniform(0.0, 180.0);
    ellipses.push_back(body);
    const i64 features = 2 + rng.below(4);
    for (i64 k = 0; k < features; ++k) {
      Ellipse e;
      e.value = rng.uniform(-0.4, 0.4);
      e.a = rng.uniform(0.08, 0.35);
      e.b = rng.uniform(0.08, 0.35);
      e.x0 = rng.uniform(-0.45, 0.45);
      e.y0 = rng.uniform(-0.45, 0.45);
      e.phi = rng.uniform(0.0, 180.0);
      ellipses.push_back(e);
    }
  }
  rasterize(img, ellipses);
  return img;
}

template <typename T>
Tensor<T> radon(const Tensor<T>& x, const CtGeometry& geom) {
  if (x.ndim() != 2) throw ShapeError("radon: image must be [h, w]");
  if (x.dim(0) != geom.image_size || x.dim(1) != geom.image_size) {
    throw ShapeError(strfmt("radon: image %s does not match geometry size %lld",
                            shape_str(x.shape()).c_str(), (long long)geom.image_size));
  }
  const kernels::CtGeom kg = geom.to_kernel();
  Tensor<T> sino = Tensor<T>::zeros({geom.n_views, geom.n_detectors});
  kernels::radon_forward(kg, x.data(), sino.data());
  if (recording<T>() && x.requires_grad()) {
    sino.set_requires_grad(true);
    Tape<T>::active()->record(sino, [x = x, sino, kg]() mutable {
      std::vector<T> gx(static_cast<std::size_t>(x.size()));
      kernels::radon_adjoint(kg, sino.storage()->grad.data(), gx.data());
      x.add_grad(gx.data(), x.size());
    });
  }
  return sino;
}

template <typename T>
Tensor<T> radon_measure(const Tensor<T>& x, const CtGeometry& geom, double noise_sigma,
                        const StreamKey& noise_key) {
  if (x.ndim() != 2 || x.dim(0) != geom.image_size || x.dim(1) != geom.image_size) {
    throw ShapeError("radon_measure: image does not match geometry");
  }
  Tensor<T> sino = Tensor<T>::zeros({geom.n_views, geom.n_detectors});
  kernels::radon_forward(geom.to_kernel(), x.data(), sino.data());
  if (noise_sigma > 0.0) {
    CounterRng rng(noise_key);
    for (i64 i = 0; i < sino.size(); ++i) sino.data()[i] += (T)rng.normal(0.0, noise_sigma);
  }
  return sino;
}

template <typename T>
Tensor<T> backproject(const Tensor<T>& sino, const CtGeometry& geom) {
  if (sino.ndim() != 2 || sino.dim(0) != geom.n_views || sino.dim(1) != geom.n_detectors) {
    throw ShapeError(strfmt("backproject: sinogram %s does not match %lldx%lld geometry",
                            shape_str(sino.shape()).c_str(), (long long)geom.n_views,
                            (long long)geom.n_detectors));
  }
  const kernels::CtGeom kg = geom.to_kernel();
  Tensor<T> img = Tensor<T>::zeros({geom.image_size, geom.image_size});
  kernels::radon_adjoint(kg, sino.data(), img.data());
  if (recording<T>() && sino.requires_grad()) {
    img.set_requires_grad(true);
    Tape<T>::active()->record(img, [sino = sino, img, kg]() mutable {
      std::vector<T> gs(static_cast<std::size_t>(sino.size()));
      kernels::radon_forward(kg, img.storage()->grad.data(), gs.data());
      sino.add_grad(gs.data(), sino.size());
    });
  }
  return img;
}

template <typename T>
Tensor<T> fbp(const Tensor<T>& sino, const CtGeometry& geom, bool hann) {
  if (sino.ndim() != 2 || sino.dim(0) != geom.n_views || sino.dim(1) != geom.n_detectors) {
    throw ShapeError("fbp: sinogram does not match geometry");
  }
  Tensor<T> img = Tensor<T>::zeros({geom.image_size, geom.image_size});
  kernels::fbp(geom.to_kernel(), sino.data(), img.data(), hann);
  return img;
}

template <typename T>
Tensor<T> normalize_magnitude(const Tensor<T>& x) {
  if (x.ndim() != 3 || x.dim(2) != 2) throw ShapeError("normalize_magnitude: need [h, w, 2]");
  double peak = 0.0;
  for (i64 i = 0; i < x.size(); i += 2) {
    const double re = (double)x.data()[i], im = (double)x.data()[i + 1];
    peak = std::max(peak, std::sqrt(re * re + im * im));
  }
  Tensor<T> out = x.clone_data();
  if (peak > 0.0) {
    const T s = (T)(1.0 / peak);
    for (i64 i = 0; i < out.size(); ++i) out.data()[i] *= s;
  }
  return out;
}

template <typename T>
Tensor<T> normalize_minmax(const Tensor<T>& x) {
  T lo = x.data()[0], hi = x.data()[0];
  for (i64 i = 1; i < x.size(); ++i) {
    lo = std::min(lo, x.data()[i]);
    hi = std::max(hi, x.data()[i]);
  }
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  if (hi > lo) {
    const T s = T(1) / (hi - lo);
    for (i64 i = 0; i < x.size(); ++i) out.data()[i] = (x.data()[i] - lo) * s;
  }
  return out;
}

template <typename T>
Tensor<T> magnitude(const Tensor<T>& x) {
  if (x.ndim() == 3 && x.dim(2) == 2) {
    Tensor<T> out = Tensor<T>::zeros({x.dim(0), x.dim(1)});
    for (i64 i = 0; i < out.size(); ++i) {
      const T re = x.data()[i * 2], im = x.data()[i * 2 + 1];
      out.data()[i] = std::sqrt(re * re + im * im);
    }
    return out;
  }
  if (x.ndim() == 2) return x.clone_data();
  if (x.ndim() == 3 && x.dim(2) == 1) {
    Tensor<T> out = Tensor<T>::from({x.dim(0), x.dim(1)}, x.vec());
    return out;
  }
  throw ShapeError("magnitude: expected [h, w], [h, w, 1], or [h, w, 2]");
}

#define MIR_INSTANTIATE_IMAGING(T)                                                        \
  template Tensor<T> radon<T>(const Tensor<T>&, const CtGeometry&);                       \
  template Tensor<T> radon_measure<T>(const Tensor<T>&, const CtGeometry&, double,        \
                                      const StreamKey&);                                  \
  template Tensor<T> backproject<T>(const Tensor<T>&, const CtGeometry&);                 \
  template Tensor<T> fbp<T>(const Tensor<T>&, const CtGeometry&, bool);                   \
  template Tensor<T> normalize_magnitude<T>(const Tensor<T>&);                            \
  template Tensor<T> normalize_minmax<T>(const Tensor<T>&);                               \
  template Tensor<T> magnitude<T>(const Tensor<T>&);

MIR_INSTANTIATE_IMAGING(float)
MIR_INSTANTIATE_IMAGING(double)

#undef MIR_INSTANTIATE_IMAGING

}  // namespace mir::imaging
