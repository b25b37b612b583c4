#pragma once

#include "mir/common.hpp"

namespace mir::kernels {

// Fan-beam geometry over a square-pixel image. The image is centered on the
// rotation axis; pixel (i, j) sits at physical (x, y) = (j - (w-1)/2,
// i - (h-1)/2) with unit pixel spacing. The source orbits at radius
// dist_source_center; a flat detector of n_det elements spaced det_pitch
// apart lies dist_source_detector from the source, perpendicular to the
// central ray. View v uses angle beta = 2*pi*v/n_views.
struct CtGeom {
  i64 h = 0, w = 0;
  i64 n_views = 0;
  i64 n_det = 0;
  double det_pitch = 0.0;
  double dist_source_center = 0.0;
  double dist_source_detector = 0.0;
  double step = 0.5;  // ray sampling pitch in pixel units

  void validate() const;
  // Detector element spacing mapped onto the virtual detector through the
  // isocenter, where filtering happens.
  double virtual_pitch() const { return det_pitch * dist_source_center / dist_source_detector; }
};

// Line integrals by midpoint quadrature with bilinear taps: sino[v, t] =
// dt * sum_k image(p_k). Rays that miss the image produce zeros.
template <typename T>
void radon_forward_serial(const CtGeom& g, const T* img, T* sino);
template <typename T>
void radon_forward_omp(const CtGeom& g, const T* img, T* sino);
template <typename T>
void radon_forward(const CtGeom& g, const T* img, T* sino);

// Exact transpose of radon_forward: the same rays, taps, and weights,
// scattered instead of gathered. Output is written, not accumulated. Both
// variants stage per-view images in fixed-size chunks and reduce them in
// ascending view order, so serial and parallel results match bitwise.
template <typename T>
void radon_adjoint_serial(const CtGeom& g, const T* sino, T* img);
template <typename T>
void radon_adjoint_omp(const CtGeom& g, const T* sino, T* img);
template <typename T>
void radon_adjoint(const CtGeom& g, const T* sino, T* img);

// Filtered backprojection. Projections are cosine weighted, convolved with
// the ramp kernel (optionally Hann tapered) on the virtual detector, then
// backprojected with inverse-square distance weighting and scaled by
// pi / n_views.
template <typename T>
void fbp_serial(const CtGeom& g, const T* sino, T* img, bool hann);
template <typename T>
void fbp_omp(const CtGeom& g, const T* sino, T* img, bool hann);
template <typename T>
void fbp(const CtGeom& g, const T* sino, T* img, bool hann);

}  // namespace mir::kernels
