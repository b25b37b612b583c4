#pragma once

#include "mir/rng.hpp"
#include "mir/tensor.hpp"

namespace mir::ssm {

// Parameters of one selective-scan unit over C channels and N state
// dimensions. The state transition is A = -exp(a_log), strictly negative.
// b_k, c_k, delta_k are produced per token by project_params.
template <typename T>
struct SsmParams {
  Tensor<T> a_log;  // [C, N]
  Tensor<T> d;      // [C]
  Tensor<T> w_b;    // [C, N]
  Tensor<T> w_c;    // [C, N]
  Tensor<T> w_dt;   // [C, C]
  Tensor<T> b_dt;   // [C]
  // b_bar = (exp(delta*a) - 1)/a * b instead of delta * b.
  bool exact_bbar = false;
};

template <typename T>
struct ScanSequence {
  Tensor<T> b;      // [L, N]
  Tensor<T> c;      // [L, N]
  Tensor<T> delta;  // [L, C], positive
};

// a_log[c][n] = log(n+1), d = 1, projections uniform in +-1/sqrt(C), b_dt
// the softplus preimage of draws from [1e-3, 1e-1].
template <typename T>
SsmParams<T> make_ssm_params(i64 c, i64 n_state, CounterRng& rng, bool exact_bbar = false);

// a_bar = exp(delta * a), b_bar = delta * b, elementwise over equal shapes.
// delta must be positive everywhere.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> discretize(const Tensor<T>& delta, const Tensor<T>& a,
                                           const Tensor<T>& b);

// Input-dependent projections: b = tok w_b, c = tok w_c,
// delta = softplus(tok w_dt + b_dt).
template <typename T>
ScanSequence<T> project_params(const Tensor<T>& tokens, const SsmParams<T>& p);

// The fused recurrence as one differentiable primitive. u and delta are
// [L, C], b and c [L, N], a [C, N], skip [C]; output [L, C].
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& a,
                         const Tensor<T>& b, const Tensor<T>& c, const Tensor<T>& skip,
                         bool exact_bbar);

// Full unit: project, derive A from a_log, scan.
template <typename T>
Tensor<T> s6_forward(const Tensor<T>& tokens, const SsmParams<T>& p);

}  // namespace mir::ssm
