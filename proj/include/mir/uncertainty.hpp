#pragma once

#include "mir/net.hpp"

namespace mir::uncertainty {

struct UncertaintyMap {
  Tensor<float> mean;  // [h, w] magnitude
  Tensor<float> stddev;
  i64 passes = 0;
  u64 seed = 0;
};

// t stochastic reconstructions of one degraded input, mask streams keyed by
// (seed, pass). Statistics are the pixelwise mean and population standard
// deviation of the reconstruction magnitude, accumulated in pass order.
// With cfg.eval_mask off every pass is identical and the deviation is zero.
UncertaintyMap mc_uncertainty(const Tensor<float>& x_u, net::ModelParams<float>& params,
                              const net::NetConfig& cfg, i64 t, u64 seed);

}  // namespace mir::uncertainty
