#pragma once

#include <string>
#include <vector>

#include "mir/io.hpp"
#include "mir/losses.hpp"
#include "mir/optim.hpp"

namespace mir::train {

struct TrainConfig {
  losses::Modality modality = losses::Modality::kMri;
  i64 steps = 200;
  i64 batch = 4;
  optim::AdamConfig adam;  // desk default lr 1e-3
  i64 crop = 32;
  bool gan = false;
  u64 seed = 0;

  i64 phantom_count = 20;  // random-ellipse dataset generated up front
  i64 phantom_size = 32;
  i64 val_count = 4;       // taken from the tail of the dataset

  i64 af = 8;              // MRI degradation
  double acs = 0.04;
  double sigma = 0.0;      // measurement noise, both modalities

  i64 views = 15;            // CT views actually measured
  i64 transform_views = 60;  // full-view transform for the loss
  i64 detectors = 0;         // 0 = geometry default

  net::NetConfig net;
  losses::LossWeights weights;
  i64 log_every = 50;
  std::string out_dir;  // empty: keep everything in memory

  void validate() const;
};

// Reads the flat `key = value` keys mirroring TrainConfig, NetConfig, and
// LossWeights field names; unknown keys are rejected.
TrainConfig config_from(io::Config& cfg);
std::string describe_weights(const losses::LossWeights& w);

struct TrainResult {
  std::vector<double> loss_trace;  // generator total per step
  std::vector<double> d_trace;     // adversarial mode only
  double input_val_psnr = 0.0;     // degraded inputs scored against targets
  double final_val_psnr = 0.0;
  double final_val_ssim = 0.0;
  double best_val_psnr = 0.0;
  i64 abort_step = -1;  // >= 0 when a non-finite loss stopped the run
};

// Runs the optimization loop; when out_dir is set, writes log.csv,
// settings.txt, and `final` / `best` checkpoint directories (an
// `abort-step-N` directory holds the last state after a non-finite loss).
TrainResult train(const TrainConfig& cfg);

// Target and degraded input for dataset index i, both [h, w, c] with c = 2
// for MRI pairs and 1 for CT, each min-max or magnitude normalized per
// image. Deterministic in (cfg.seed, index).
struct Sample {
  Tensor<float> x, x_u;
};
Sample make_sample(const TrainConfig& cfg, i64 index);

}  // namespace mir::train
