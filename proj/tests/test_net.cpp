#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "mir/net.hpp"

using namespace mir;
using mir::testing::bitwise_equal;
using mir::testing::max_abs_diff;
using mir::testing::random_tensor;

namespace {

net::NetConfig desk_config(i64 in_channels) {
  net::NetConfig cfg;
  cfg.in_channels = in_channels;
  cfg.patch = 4;
  cfg.embed = 16;
  cfg.groups = 2;
  cfg.blocks_per_group = 1;
  cfg.expansion = 2;
  cfg.n_state = 4;
  return cfg;
}

// a_log + d + w_b + w_c + w_dt + b_dt of one scan unit over e channels.
i64 ssm_count(i64 e, i64 n) { return e * n + e + e * n + e * n + e * e + e; }

// Closed-form parameter count assembled independently of named_params.
i64 expected_count(const net::NetConfig& cfg) {
  const i64 c = cfg.embed, in = cfg.in_channels, p = cfg.patch, e = cfg.expansion * c;
  const i64 ssm_unit = ssm_count(e, cfg.n_state);
  const i64 sets = cfg.per_direction_ssm ? 4 : 1;
  const i64 block = 2 * c            // prenorm
                    + c * e + e      // gate_in
                    + 9 * e + e      // depth-wise conv
                    + sets * ssm_unit
                    + 2 * e          // postnorm
                    + c * e + e      // side
                    + e * c + c;     // gate_out
  const i64 group = cfg.blocks_per_group * block + 2 * c + 9 * c * c + c;
  return p * p * in * c + c          // embed
         + cfg.groups * group
         + c * (p * p * in) + p * p * in;  // unembed
}

}  // namespace

TEST_CASE("a fresh network reproduces its input exactly") {
  for (i64 in_channels : {1LL, 2LL}) {
    net::NetConfig cfg = desk_config(in_channels);
    net::ModelParams<float> params = net::init_model<float>(cfg);
    TensorF x = random_tensor<float>({32, 32, in_channels}, 200 + (u64)in_channels);
    blocks::ForwardCtx eval_ctx;  // inactive: no masking
    TensorF out = net::forward(x, params, cfg, eval_ctx);
    REQUIRE(out.shape() == x.shape());
    CHECK(max_abs_diff(out, x) == 0.0f);
  }
}

TEST_CASE("identity at init holds under training-mode mask draws") {
  net::NetConfig cfg = desk_config(2);
  net::ModelParams<float> params = net::init_model<float>(cfg);
  TensorF x = random_tensor<float>({16, 16, 2}, 203);
  for (u64 step = 0; step < 4; ++step) {
    blocks::ForwardCtx ctx{11, step, 0, true, false};
    CHECK(max_abs_diff(net::forward(x, params, cfg, ctx), x) == 0.0f);
  }
}

TEST_CASE("forward preserves arbitrary patch-aligned extents") {
  net::NetConfig cfg = desk_config(1);
  net::ModelParams<float> params = net::init_model<float>(cfg);
  blocks::ForwardCtx ctx;
  for (Shape s : {Shape{32, 32, 1}, Shape{64, 64, 1}, Shape{32, 64, 1}, Shape{4, 4, 1}}) {
    TensorF x = random_tensor<float>(s, 205);
    CHECK(net::forward(x, params, cfg, ctx).shape() == s);
  }
}

TEST_CASE("misaligned extents raise an error naming the padded size") {
  net::NetConfig cfg = desk_config(1);
  net::ModelParams<float> params = net::init_model<float>(cfg);
  blocks::ForwardCtx ctx;
  TensorF x = random_tensor<float>({30, 33, 1}, 206);
  try {
    (void)net::forward(x, params, cfg, ctx);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("pad to") != std::string::npos);
    CHECK(msg.find("32x36") != std::string::npos);
  }
}

TEST_CASE("channel mismatch against the config is rejected") {
  net::NetConfig cfg = desk_config(2);
  net::ModelParams<float> params = net::init_model<float>(cfg);
  blocks::ForwardCtx ctx;
  TensorF x = random_tensor<float>({16, 16, 1}, 207);
  CHECK_THROWS_AS((void)net::forward(x, params, cfg, ctx), ShapeError);
}

TEST_CASE("config validation rejects impossible settings") {
  net::NetConfig cfg = desk_config(2);
  cfg.patch = 0;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
  cfg = desk_config(2);
  cfg.groups = -1;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
  cfg = desk_config(0);
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
}

TEST_CASE("parameter count matches the closed form") {
  for (bool per_dir : {false, true}) {
    net::NetConfig cfg = desk_config(2);
    cfg.per_direction_ssm = per_dir;
    net::ModelParams<double> params = net::init_model<double>(cfg);
    CHECK(net::param_count(params) == expected_count(cfg));
  }
  net::NetConfig wide = desk_config(1);
  wide.embed = 8;
  wide.groups = 3;
  wide.blocks_per_group = 2;
  net::ModelParams<double> params = net::init_model<double>(wide);
  CHECK(net::param_count(params) == expected_count(wide));
}

TEST_CASE("named parameters are unique, live, and complete") {
  net::NetConfig cfg = desk_config(2);
  net::ModelParams<double> params = net::init_model<double>(cfg);
  auto named = net::named_params(params);
  std::set<std::string> names;
  i64 total = 0;
  for (auto& [name, t] : named) {
    CHECK(names.insert(name).second);
    CHECK(t.requires_grad());
    total += t.size();
  }
  CHECK(total == net::param_count(params));
}

TEST_CASE("mask replay makes stochastic passes reproducible") {
  net::NetConfig cfg = desk_config(2);
  net::ModelParams<float> params = net::init_model<float>(cfg);
  // The identity network ignores masking entirely; give the output head
  // weight so dropped scans show up.
  for (auto& [name, t] : net::named_params(params)) {
    if (name == "unembed.w") {
      TensorF r = random_tensor<float>(t.shape(), 208, -0.05f, 0.05f);
      std::copy(r.data(), r.data() + r.size(), t.data());
    }
  }
  TensorF x = random_tensor<float>({16, 16, 2}, 209);

  blocks::ForwardCtx mc{21, 5, 2, false, true};
  TensorF a = net::forward(x, params, cfg, mc);
  TensorF b = net::forward(x, params, cfg, mc);
  CHECK(bitwise_equal(a, b));

  // Unembed perturbation alone cannot reveal the masks (blocks still carry
  // zero output gates), so the clean pass must equal the masked one here.
  blocks::ForwardCtx eval_ctx;
  TensorF clean = net::forward(x, params, cfg, eval_ctx);
  CHECK(bitwise_equal(a, clean));
}

TEST_CASE("mask draws change the output once the blocks carry signal") {
  net::NetConfig cfg = desk_config(2);
  cfg.groups = 1;
  net::ModelParams<float> params = net::init_model<float>(cfg);
  CounterRng rng(StreamKey{210, fnv1a("net-perturb"), 0, 0});
  for (auto& [name, t] : net::named_params(params)) {
    // Lift every zero-initialized head so masking reaches the output.
    if (name.find("gate_out.w") != std::string::npos || name == "unembed.w") {
      for (i64 i = 0; i < t.size(); ++i) t.data()[i] = (float)rng.uniform(-0.1, 0.1);
    }
  }
  TensorF x = random_tensor<float>({16, 16, 2}, 211);

  // Steps 0..7 of the same seed include distinct draws; at least one masked
  // pass must differ from the clean pass.
  blocks::ForwardCtx eval_ctx;
  TensorF clean = net::forward(x, params, cfg, eval_ctx);
  bool any_diff = false;
  for (u64 step = 0; step < 8 && !any_diff; ++step) {
    blocks::ForwardCtx mc{33, step, 0, false, true};
    any_diff = !bitwise_equal(net::forward(x, params, cfg, mc), clean);
  }
  CHECK(any_diff);
}
