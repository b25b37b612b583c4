#include "mir/uncertainty.hpp"

#include <cmath>

#include "mir/imaging.hpp"

namespace mir::uncertainty {

UncertaintyMap mc_uncertainty(const Tensor<float>& x_u, net::ModelParams<float>& params,
                              const net::NetConfig& cfg, i64 t, u64 seed) {
  if (t < 1) throw ShapeError("mc_uncertainty: pass count must be >= 1");
  const i64 h = x_u.dim(0), w = x_u.dim(1);
  std::vector<double> sum((std::size_t)(h * w), 0.0);
  std::vector<double> sum_sq((std::size_t)(h * w), 0.0);
  for (i64 pass = 0; pass < t; ++pass) {
    blocks::ForwardCtx ctx;
    ctx.seed = seed;
    ctx.step = (u64)pass;
    ctx.mc = cfg.eval_mask;
    Tensor<float> xhat = net::forward(x_u, params, cfg, ctx);
    Tensor<float> mag = imaging::magnitude(xhat);
    for (i64 i = 0; i < mag.size(); ++i) {
      sum[(std::size_t)i] += (double)mag.data()[i];
      sum_sq[(std::size_t)i] += (double)mag.data()[i] * (double)mag.data()[i];
    }
  }
  UncertaintyMap map;
  map.passes = t;
  map.seed = seed;
  map.mean = Tensor<float>::zeros({h, w});
  map.stddev = Tensor<float>::zeros({h, w});
  for (i64 i = 0; i < h * w; ++i) {
    const double m = sum[(std::size_t)i] / (double)t;
    const double var = std::max(0.0, sum_sq[(std::size_t)i] / (double)t - m * m);
    map.mean.data()[i] = (float)m;
    map.stddev.data()[i] = (float)std::sqrt(var);
  }
  return map;
}

}  // namespace mir::uncertainty
