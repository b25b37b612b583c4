#pragma once

#include <cstdint>

#include "mir/kernels/radon.hpp"
#include "mir/rng.hpp"
#include "mir/tensor.hpp"

namespace mir::imaging {

// 1D Cartesian line mask along the second image axis. Indices are in the
// centered convention: the DC line sits at W/2, and centered index j maps to
// DFT column (j - W/2) mod W.
struct MriSamplingSpec {
  std::vector<std::uint8_t> mask;  // length W, 1 = sampled
  i64 af = 1;
  i64 acs = 0;
  u64 seed = 0;

  i64 width() const { return (i64)mask.size(); }
  i64 popcount() const;
};

// acs = max(2, round(acs_fraction * w)) center lines always on; the rest of
// the ceil(w / af) budget is drawn uniformly without replacement. af = 1
// sets every line.
MriSamplingSpec make_cartesian_mask(i64 w, i64 af, double acs_fraction, u64 seed);

// y = mask ( F x ) + noise on the sampled entries. x is [h, w, 2]; the
// transform is the orthonormal fft2. Plain data functions, not recorded.
Tensor<float> mri_forward(const Tensor<float>& x, const MriSamplingSpec& spec, double noise_sigma,
                          const StreamKey& noise_key);
Tensor<double> mri_forward(const Tensor<double>& x, const MriSamplingSpec& spec,
                           double noise_sigma, const StreamKey& noise_key);

// A* y: inverse orthonormal fft2 of the masked measurements.
Tensor<float> mri_zero_fill(const Tensor<float>& y, const MriSamplingSpec& spec);
Tensor<double> mri_zero_fill(const Tensor<double>& y, const MriSamplingSpec& spec);

struct CtGeometry {
  i64 n_views = 60;
  i64 n_detectors = 96;
  double detector_pitch = 0.0;
  double source_to_center = 0.0;
  double source_to_detector = 0.0;
  i64 image_size = 64;
  double pixel_pitch = 1.0;
  double ray_step = 0.5;  // sampling pitch along each ray, in pixels

  kernels::CtGeom to_kernel() const;
};

// 64-class geometry: source at 2x the image size, detector at 4x, detector
// row 1.5x the image size wide with pitch chosen to cover the fan.
CtGeometry desk_ct_geometry(i64 image_size, i64 n_views);

enum class PhantomKind { kSheppLogan, kRandomEllipses };

// Images in [0, 1], shape [h, w]. Random phantoms superpose at least three
// seeded ellipses. Boundaries are area-averaged over a 4x4 per-pixel grid;
// pixels strictly inside a region keep its exact level.
Tensor<float> make_phantom(PhantomKind kind, i64 h, i64 w, u64 seed);

// Differentiable fan-beam projections of an [h, w] image; the backward rule
// is the exact adjoint. Optional Gaussian noise for measurement synthesis.
template <typename T>
Tensor<T> radon(const Tensor<T>& x, const CtGeometry& geom);
template <typename T>
Tensor<T> radon_measure(const Tensor<T>& x, const CtGeometry& geom, double noise_sigma,
                        const StreamKey& noise_key);

// Adjoint as a differentiable op (its backward rule is radon).
template <typename T>
Tensor<T> backproject(const Tensor<T>& sino, const CtGeometry& geom);

// Filtered backprojection; not recorded on any tape.
template <typename T>
Tensor<T> fbp(const Tensor<T>& sino, const CtGeometry& geom, bool hann = false);

// Scales a [h, w, 2] pair so its peak magnitude is 1 (no-op on zero input).
template <typename T>
Tensor<T> normalize_magnitude(const Tensor<T>& x);
// Affine min-max rescale of any tensor to [0, 1] (zeros when constant).
template <typename T>
Tensor<T> normalize_minmax(const Tensor<T>& x);

// Magnitude image of an [h, w, 2] pair, or a copy of an [h, w] / [h, w, 1]
// image.
template <typename T>
Tensor<T> magnitude(const Tensor<T>& x);

}  // namespace mir::imaging
