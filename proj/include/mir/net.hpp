#pragma once

#include <string>

#include "mir/blocks.hpp"

namespace mir::net {

struct NetConfig {
  i64 in_channels = 2;       // 2 for complex pairs, 1 for CT
  i64 patch = 4;
  i64 embed = 16;            // desk default; 180 at full scale
  i64 groups = 2;            // desk default; 6 at full scale
  i64 blocks_per_group = 1;  // desk default; 2 at full scale
  i64 expansion = 2;
  i64 n_state = 4;           // desk default; 16 common at full scale
  bool eval_mask = false;    // masking during inference (uncertainty passes)
  bool per_direction_ssm = false;
  bool exact_bbar = false;
  u64 seed = 0;

  void validate() const;
};

template <typename T>
struct ModelParams {
  Tensor<T> embed_w, embed_b;  // [p, p, c, C], [C]
  struct Group {
    std::vector<blocks::AmssBlockParams<T>> blocks;
    Tensor<T> norm_g, norm_b;  // [C]
    Tensor<T> conv_w, conv_b;  // [3, 3, C, C], [C]
  };
  std::vector<Group> groups;
  Tensor<T> unembed_w, unembed_b;  // [C, p*p*c], [p*p*c]; zero so the net starts as identity
};

template <typename T>
ModelParams<T> init_model(const NetConfig& cfg);

// Stable name -> tensor registry used by the optimizer and checkpoints.
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> named_params(ModelParams<T>& params);

template <typename T>
i64 param_count(ModelParams<T>& params);

// x is [h, w, c] with h, w divisible by patch. Masking streams are keyed by
// (ctx.seed, ctx.step, ctx.sample, block index); with ctx inactive every
// draw is s = 0.
template <typename T>
Tensor<T> forward(const Tensor<T>& x, ModelParams<T>& params, const NetConfig& cfg,
                  const blocks::ForwardCtx& ctx);

}  // namespace mir::net
