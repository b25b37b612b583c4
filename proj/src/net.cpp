#include "mir/net.hpp"

#include <cmath>

#include "mir/ops.hpp"

namespace mir::net {

void NetConfig::validate() const {
  if (in_channels <= 0 || patch <= 0 || embed <= 0 || groups <= 0 || blocks_per_group <= 0 ||
      expansion <= 0 || n_state <= 0) {
    throw ShapeError("NetConfig: non-positive field");
  }
}

template <typename T>
ModelParams<T> init_model(const NetConfig& cfg) {
  cfg.validate();
  CounterRng rng(StreamKey{cfg.seed, fnv1a("model-init"), 0, 0});
  ModelParams<T> m;
  const i64 p = cfg.patch, c = cfg.in_channels, e = cfg.embed;
  auto uniform_fill = [&](Tensor<T>& t, i64 fan_in) {
    const double bound = 1.0 / std::sqrt((double)fan_in);
    for (i64 i = 0; i < t.size(); ++i) t.data()[i] = (T)rng.uniform(-bound, bound);
  };
  m.embed_w = Tensor<T>::zeros({p, p, c, e});
  uniform_fill(m.embed_w, p * p * c);
  m.embed_b = Tensor<T>::zeros({e});
  for (i64 g = 0; g < cfg.groups; ++g) {
    typename ModelParams<T>::Group grp;
    for (i64 b = 0; b < cfg.blocks_per_group; ++b) {
      grp.blocks.push_back(blocks::make_amss_block<T>(e, cfg.expansion, cfg.n_state, rng,
                                                      cfg.per_direction_ssm, cfg.exact_bbar));
    }
    grp.norm_g = Tensor<T>::full({e}, T(1));
    grp.norm_b = Tensor<T>::zeros({e});
    grp.conv_w = Tensor<T>::zeros({3, 3, e, e});
    uniform_fill(grp.conv_w, 9 * e);
    grp.conv_b = Tensor<T>::zeros({e});
    m.groups.push_back(std::move(grp));
  }
  m.unembed_w = Tensor<T>::zeros({e, p * p * c});
  m.unembed_b = Tensor<T>::zeros({p * p * c});
  for (auto& [name, t] : named_params(m)) t.set_requires_grad(true);
  return m;
}

namespace {

template <typename T>
void add_ssm(std::vector<std::pair<std::string, Tensor<T>>>& out, const std::string& prefix,
             ssm::SsmParams<T>& s) {
  out.emplace_back(prefix + ".a_log", s.a_log);
  out.emplace_back(prefix + ".d", s.d);
  out.emplace_back(prefix + ".w_b", s.w_b);
  out.emplace_back(prefix + ".w_c", s.w_c);
  out.emplace_back(prefix + ".w_dt", s.w_dt);
  out.emplace_back(prefix + ".b_dt", s.b_dt);
}

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> named_params(ModelParams<T>& m) {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.emplace_back("embed.w", m.embed_w);
  out.emplace_back("embed.b", m.embed_b);
  for (std::size_t g = 0; g < m.groups.size(); ++g) {
    auto& grp = m.groups[g];
    const std::string gp = "g" + std::to_string(g);
    for (std::size_t b = 0; b < grp.blocks.size(); ++b) {
      auto& blk = grp.blocks[b];
      const std::string bp = gp + ".b" + std::to_string(b);
      out.emplace_back(bp + ".prenorm.g", blk.prenorm_g);
      out.emplace_back(bp + ".prenorm.b", blk.prenorm_b);
      out.emplace_back(bp + ".gate_in.w", blk.gate_in_w);
      out.emplace_back(bp + ".gate_in.b", blk.gate_in_b);
      out.emplace_back(bp + ".dw.w", blk.dw_w);
      out.emplace_back(bp + ".dw.b", blk.dw_b);
      for (std::size_t s = 0; s < blk.ssm.size(); ++s) {
        add_ssm(out, bp + ".ssm" + std::to_string(s), blk.ssm[s]);
      }
      out.emplace_back(bp + ".postnorm.g", blk.postnorm_g);
      out.emplace_back(bp + ".postnorm.b", blk.postnorm_b);
      out.emplace_back(bp + ".side.w", blk.side_w);
      out.emplace_back(bp + ".side.b", blk.side_b);
      out.emplace_back(bp + ".gate_out.w", blk.gate_out_w);
      out.emplace_back(bp + ".gate_out.b", blk.gate_out_b);
    }
    out.emplace_back(gp + ".norm.g", grp.norm_g);
    out.emplace_back(gp + ".norm.b", grp.norm_b);
    out.emplace_back(gp + ".conv.w", grp.conv_w);
    out.emplace_back(gp + ".conv.b", grp.conv_b);
  }
  out.emplace_back("unembed.w", m.unembed_w);
  out.emplace_back("unembed.b", m.unembed_b);
  return out;
}

template <typename T>
i64 param_count(ModelParams<T>& m) {
  i64 total = 0;
  for (auto& [name, t] : named_params(m)) total += t.size();
  return total;
}

template <typename T>
Tensor<T> forward(const Tensor<T>& x, ModelParams<T>& m, const NetConfig& cfg,
                  const blocks::ForwardCtx& ctx) {
  cfg.validate();
  if (x.ndim() != 3 || x.dim(2) != cfg.in_channels) {
    throw ShapeError(strfmt("forward: input %s does not match %lld channels",
                            shape_str(x.shape()).c_str(), (long long)cfg.in_channels));
  }
  if (x.dim(0) % cfg.patch != 0 || x.dim(1) % cfg.patch != 0) {
    throw ShapeError(strfmt(
        "forward: extents %lldx%lld not divisible by patch %lld; pad to %lldx%lld",
        (long long)x.dim(0), (long long)x.dim(1), (long long)cfg.patch,
        (long long)((x.dim(0) + cfg.patch - 1) / cfg.patch * cfg.patch),
        (long long)((x.dim(1) + cfg.patch - 1) / cfg.patch * cfg.patch)));
  }
  Tensor<T> lat = ops::conv2d(x, m.embed_w, m.embed_b, cfg.patch, 0, 1);
  u64 block_index = 0;
  for (auto& grp : m.groups) {
    Tensor<T> t = lat;
    for (auto& blk : grp.blocks) {
      blocks::MaskDraw draw;  // s = 0 unless the context is stochastic
      if (ctx.active()) draw = blocks::draw_mask(ctx.seed, ctx.step, ctx.sample, block_index);
      t = blocks::amss_block_forward(t, blk, draw);
      ++block_index;
    }
    t = ops::layernorm(t, grp.norm_g, grp.norm_b);
    t = ops::conv2d(t, grp.conv_w, grp.conv_b, 1, 1, 1);
    lat = ops::add(lat, t);
  }
  Tensor<T> u = ops::linear(lat, m.unembed_w, m.unembed_b);
  Tensor<T> img = ops::depth_to_space(u, cfg.patch);
  return ops::add(x, img);
}

#define MIR_INSTANTIATE_NET(T)                                                             \
  template ModelParams<T> init_model<T>(const NetConfig&);                                 \
  template std::vector<std::pair<std::string, Tensor<T>>> named_params<T>(ModelParams<T>&); \
  template i64 param_count<T>(ModelParams<T>&);                                           \
  template Tensor<T> forward<T>(const Tensor<T>&, ModelParams<T>&, const NetConfig&,      \
                                const blocks::ForwardCtx&);

MIR_INSTANTIATE_NET(float)
MIR_INSTANTIATE_NET(double)

#undef MIR_INSTANTIATE_NET

}  // namespace mir::net
