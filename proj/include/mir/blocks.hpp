#pragma once

#include <array>

#include "mir/ssm.hpp"

namespace mir::blocks {

// The four scan orderings over an H x W token grid.
enum ScanOrder : int {
  kRowTL = 0,  // row-major from the top-left
  kColTL = 1,  // column-major from the top-left
  kRowBR = 2,  // reverse of row-TL
  kColBR = 3,  // reverse of col-TL
};
inline constexpr int kNumScanOrders = 4;

// order[k] = grid index of the k-th token in the given ordering.
std::vector<i64> scan_order(i64 h, i64 w, int ordering);
// inv[g] = position of grid index g in the ordering (its inverse permutation).
std::vector<i64> scan_inverse(i64 h, i64 w, int ordering);

// Pre-committed masking decision for one block application.
struct MaskDraw {
  int s = 0;                                           // number of masked scans
  std::array<bool, kNumScanOrders> masked = {false, false, false, false};
  StreamKey key;
};

// s ~ Uniform{0,1,2,3}, then s distinct orderings, from the stream keyed by
// (seed, step, sample, block). Identical keys replay identically.
MaskDraw draw_mask(u64 seed, u64 step, u64 sample, u64 block);

// Per-application context threaded through the network. Masking draws
// happen only when active() holds; otherwise s = 0.
struct ForwardCtx {
  u64 seed = 0;
  u64 step = 0;
  u64 sample = 0;
  bool training = false;
  bool mc = false;  // masking at inference, for uncertainty passes

  bool active() const { return training || mc; }
};

// Scan expand -> mask -> per-scan S6 -> merge. Masked scans are skipped
// outright: a zeroed sequence scans to the zero grid and the merge divides
// by the survivor count only, so skipping reproduces it exactly. ssm holds
// one shared parameter set or one per direction.
template <typename T>
Tensor<T> ams6_forward(const Tensor<T>& grid, const std::vector<ssm::SsmParams<T>>& ssm,
                       const MaskDraw& draw);

template <typename T>
struct AmssBlockParams {
  Tensor<T> prenorm_g, prenorm_b;  // [C]
  Tensor<T> gate_in_w, gate_in_b;  // [C, E*C], [E*C]
  Tensor<T> dw_w, dw_b;            // [3, 3, 1, E*C], [E*C]
  std::vector<ssm::SsmParams<T>> ssm;  // size 1 (shared) or 4 (per direction)
  Tensor<T> postnorm_g, postnorm_b;  // [E*C]
  Tensor<T> side_w, side_b;          // [C, E*C], [E*C]
  Tensor<T> gate_out_w, gate_out_b;  // [E*C, C], [C]
};

template <typename T>
AmssBlockParams<T> make_amss_block(i64 c, i64 expansion, i64 n_state, CounterRng& rng,
                                   bool per_direction, bool exact_bbar);

// out = x + gate_out(postnorm(ams6(silu(dwconv(gate_in(prenorm(x)))))) *
//                    silu(side(prenorm(x))))
template <typename T>
Tensor<T> amss_block_forward(const Tensor<T>& x, const AmssBlockParams<T>& p,
                             const MaskDraw& draw);

}  // namespace mir::blocks
