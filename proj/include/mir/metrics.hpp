#pragma once

#include <vector>

#include "mir/tensor.hpp"

namespace mir::metrics {

// Peak signal-to-noise ratio over a [0, 1] dynamic range, capped at 100 dB
// so identical images report a finite value. Inputs are [h, w] grayscale or
// [h, w, 2] pairs, which are compared by magnitude.
double psnr(const Tensor<float>& pred, const Tensor<float>& ref);

// Structural similarity with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, range 1.0, averaged over window positions that lie fully inside
// the image. Extents must be at least 11.
double ssim(const Tensor<float>& pred, const Tensor<float>& ref);

struct MetricsReport {
  std::vector<double> psnr;  // per image
  std::vector<double> ssim;
  double psnr_mean = 0.0, psnr_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
};

// Pairs pred[i] with ref[i]; lists must be equal length and nonempty.
// Spread is the population standard deviation.
MetricsReport compute_metrics(const std::vector<Tensor<float>>& pred,
                              const std::vector<Tensor<float>>& ref);

}  // namespace mir::metrics
