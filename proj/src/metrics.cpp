#include "mir/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mir/imaging.hpp"

namespace mir::metrics {

namespace {

// Magnitude conversion first, so pairs are compared as grayscale planes.
void to_gray_pair(const Tensor<float>& pred, const Tensor<float>& ref, Tensor<float>& a,
                  Tensor<float>& b) {
  a = imaging::magnitude(pred);
  b = imaging::magnitude(ref);
  if (a.shape() != b.shape()) {
    throw ShapeError(strfmt("metrics: shape mismatch %s vs %s", shape_str(a.shape()).c_str(),
                            shape_str(b.shape()).c_str()));
  }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * range)^2
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v((std::size_t)(kWindow * kWindow));
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      for (int j = 0; j < kWindow; ++j) {
        const double di = i - (kWindow - 1) / 2.0;
        const double dj = j - (kWindow - 1) / 2.0;
        const double g = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
        v[(std::size_t)(i * kWindow + j)] = g;
        total += g;
      }
    }
    for (auto& x : v) x /= total;
    return v;
  }();
  return w;
}

}  // namespace

double psnr(const Tensor<float>& pred, const Tensor<float>& ref) {
  Tensor<float> a, b;
  to_gray_pair(pred, ref, a, b);
  double mse = 0.0;
  for (i64 i = 0; i < a.size(); ++i) {
    const double d = (double)a.data()[i] - (double)b.data()[i];
    mse += d * d;
  }
  mse /= (double)a.size();
  if (mse <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor<float>& pred, const Tensor<float>& ref) {
  Tensor<float> a, b;
  to_gray_pair(pred, ref, a, b);
  const i64 h = a.dim(0), w = a.dim(1);
  if (h < kWindow || w < kWindow) {
    throw ShapeError(strfmt("ssim: image %lldx%lld smaller than the %dx%d window", (long long)h,
                            (long long)w, kWindow, kWindow));
  }
  const std::vector<double>& win = gaussian_window();
  double total = 0.0;
  i64 count = 0;
  for (i64 i = 0; i + kWindow <= h; ++i) {
    for (i64 j = 0; j + kWindow <= w; ++j) {
      double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
      for (int u = 0; u < kWindow; ++u) {
        for (int v = 0; v < kWindow; ++v) {
          const double g = win[(std::size_t)(u * kWindow + v)];
          const double x = (double)a.data()[(i + u) * w + (j + v)];
          const double y = (double)b.data()[(i + u) * w + (j + v)];
          mx += g * x;
          my += g * y;
          mxx += g * x * x;
          myy += g * y * y;
          mxy += g * x * y;
        }
      }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double cxy = mxy - mx * my;
      const double num = (2.0 * mx * my + kC1) * (2.0 * cxy + kC2);
      const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
      total += num / den;
      ++count;
    }
  }
  return total / (double)count;
}

MetricsReport compute_metrics(const std::vector<Tensor<float>>& pred,
                              const std::vector<Tensor<float>>& ref) {
  if (pred.empty() || pred.size() != ref.size()) {
    throw ShapeError("compute_metrics: lists must be equal length and nonempty");
  }
  MetricsReport report;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    report.psnr.push_back(psnr(pred[i], ref[i]));
    report.ssim.push_back(ssim(pred[i], ref[i]));
  }
  auto stats = [](const std::vector<double>& xs, double& mean, double& stddev) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= (double)xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    stddev = std::sqrt(var / (double)xs.size());
  };
  stats(report.psnr, report.psnr_mean, report.psnr_std);
  stats(report.ssim, report.ssim_mean, report.ssim_std);
  return report;
}

}  // namespace mir::metrics
