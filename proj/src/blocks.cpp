#include "mir/blocks.hpp"

#include <cmath>

#include "mir/ops.hpp"

namespace mir::blocks {

std::vector<i64> scan_order(i64 h, i64 w, int ordering) {
  if (h <= 0 || w <= 0) throw ShapeError("scan_order: empty grid");
  const i64 l = h * w;
  std::vector<i64> order(static_cast<std::size_t>(l));
  switch (ordering) {
    case kRowTL:
      for (i64 k = 0; k < l; ++k) order[(std::size_t)k] = k;
      break;
    case kColTL:
      for (i64 k = 0; k < l; ++k) order[(std::size_t)k] = (k % h) * w + (k / h);
      break;
    case kRowBR:
      for (i64 k = 0; k < l; ++k) order[(std::size_t)k] = l - 1 - k;
      break;
    case kColBR:
      for (i64 k = 0; k < l; ++k) {
        const i64 r = l - 1 - k;
        order[(std::size_t)k] = (r % h) * w + (r / h);
      }
      break;
    default:
      throw ShapeError(strfmt("scan_order: unknown ordering %d", ordering));
  }
  return order;
}

std::vector<i64> scan_inverse(i64 h, i64 w, int ordering) {
  const std::vector<i64> fwd = scan_order(h, w, ordering);
  std::vector<i64> inv(fwd.size());
  for (std::size_t k = 0; k < fwd.size(); ++k) inv[(std::size_t)fwd[k]] = (i64)k;
  return inv;
}

MaskDraw draw_mask(u64 seed, u64 step, u64 sample, u64 block) {
  MaskDraw draw;
  draw.key = StreamKey{seed, step, sample, block};
  CounterRng rng(draw.key);
  draw.s = (int)rng.below(4);
  // Partial Fisher-Yates over the four ordering ids.
  std::array<int, kNumScanOrders> ids = {0, 1, 2, 3};
  for (int i = 0; i < draw.s; ++i) {
    const int j = i + (int)rng.below(kNumScanOrders - i);
    std::swap(ids[(std::size_t)i], ids[(std::size_t)j]);
    draw.masked[(std::size_t)ids[(std::size_t)i]] = true;
  }
  return draw;
}

template <typename T>
Tensor<T> ams6_forward(const Tensor<T>& grid, const std::vector<ssm::SsmParams<T>>& ssm,
                       const MaskDraw& draw) {
  if (grid.ndim() != 3) throw ShapeError("ams6_forward: grid must be [h, w, c]");
  if (ssm.size() != 1 && ssm.size() != (std::size_t)kNumScanOrders) {
    throw ShapeError("ams6_forward: expected 1 shared or 4 per-direction parameter sets");
  }
  const i64 h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  const i64 l = h * w;
  Tensor<T> tokens = ops::reshape(grid, {l, c});
  Tensor<T> acc;
  int survivors = 0;
  for (int o = 0; o < kNumScanOrders; ++o) {
    if (draw.masked[(std::size_t)o]) continue;
    const ssm::SsmParams<T>& p = ssm.size() == 1 ? ssm[0] : ssm[(std::size_t)o];
    Tensor<T> seq = ops::gather_rows(tokens, scan_order(h, w, o));
    Tensor<T> y = ssm::s6_forward(seq, p);
    Tensor<T> back = ops::gather_rows(y, scan_inverse(h, w, o));
    acc = acc.defined() ? ops::add(acc, back) : back;
    ++survivors;
  }
  // draw.s <= 3 guarantees at least one survivor.
  Tensor<T> merged = ops::scale(acc, T(1) / (T)survivors);
  return ops::reshape(merged, {h, w, c});
}

template <typename T>
AmssBlockParams<T> make_amss_block(i64 c, i64 expansion, i64 n_state, CounterRng& rng,
                                   bool per_direction, bool exact_bbar) {
  if (c <= 0 || expansion <= 0 || n_state <= 0) throw ShapeError("make_amss_block: bad dims");
  const i64 ec = expansion * c;
  AmssBlockParams<T> p;
  p.prenorm_g = Tensor<T>::full({c}, T(1));
  p.prenorm_b = Tensor<T>::zeros({c});
  auto uniform_fill = [&](Tensor<T>& t, i64 fan_in) {
    const double bound = 1.0 / std::sqrt((double)fan_in);
    for (i64 i = 0; i < t.size(); ++i) t.data()[i] = (T)rng.uniform(-bound, bound);
  };
  p.gate_in_w = Tensor<T>::zeros({c, ec});
  uniform_fill(p.gate_in_w, c);
  p.gate_in_b = Tensor<T>::zeros({ec});
  p.dw_w = Tensor<T>::zeros({3, 3, 1, ec});
  uniform_fill(p.dw_w, 9);
  p.dw_b = Tensor<T>::zeros({ec});
  const int sets = per_direction ? kNumScanOrders : 1;
  for (int i = 0; i < sets; ++i) {
    p.ssm.push_back(ssm::make_ssm_params<T>(ec, n_state, rng, exact_bbar));
  }
  p.postnorm_g = Tensor<T>::full({ec}, T(1));
  p.postnorm_b = Tensor<T>::zeros({ec});
  p.side_w = Tensor<T>::zeros({c, ec});
  uniform_fill(p.side_w, c);
  p.side_b = Tensor<T>::zeros({ec});
  // Zero output gate: the residual makes a fresh block the identity map.
  p.gate_out_w = Tensor<T>::zeros({ec, c});
  p.gate_out_b = Tensor<T>::zeros({c});
  return p;
}

template <typename T>
Tensor<T> amss_block_forward(const Tensor<T>& x, const AmssBlockParams<T>& p,
                             const MaskDraw& draw) {
  if (x.ndim() != 3) throw ShapeError("amss_block_forward: input must be [h, w, c]");
  const i64 ec = p.gate_in_w.dim(1);
  Tensor<T> z = ops::layernorm(x, p.prenorm_g, p.prenorm_b);
  Tensor<T> g = ops::linear(z, p.gate_in_w, p.gate_in_b);
  g = ops::conv2d(g, p.dw_w, p.dw_b, 1, 1, ec);
  g = ops::silu(g);
  g = ams6_forward(g, p.ssm, draw);
  g = ops::layernorm(g, p.postnorm_g, p.postnorm_b);
  Tensor<T> side = ops::silu(ops::linear(z, p.side_w, p.side_b));
  Tensor<T> merged = ops::mul(g, side);
  Tensor<T> out = ops::linear(merged, p.gate_out_w, p.gate_out_b);
  return ops::add(x, out);
}

#define MIR_INSTANTIATE_BLOCKS(T)                                                              \
  template Tensor<T> ams6_forward<T>(const Tensor<T>&, const std::vector<ssm::SsmParams<T>>&,  \
                                     const MaskDraw&);                                         \
  template AmssBlockParams<T> make_amss_block<T>(i64, i64, i64, CounterRng&, bool, bool);      \
  template Tensor<T> amss_block_forward<T>(const Tensor<T>&, const AmssBlockParams<T>&,        \
                                           const MaskDraw&);

MIR_INSTANTIATE_BLOCKS(float)
MIR_INSTANTIATE_BLOCKS(double)

#undef MIR_INSTANTIATE_BLOCKS

}  // namespace mir::blocks
