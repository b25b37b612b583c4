#include "mir/ssm.hpp"

#include <cmath>

#include "mir/kernels/scan.hpp"
#include "mir/ops.hpp"

namespace mir::ssm {

template <typename T>
SsmParams<T> make_ssm_params(i64 c, i64 n_state, CounterRng& rng, bool exact_bbar) {
  if (c <= 0 || n_state <= 0) throw ShapeError("make_ssm_params: non-positive dims");
  SsmParams<T> p;
  p.exact_bbar = exact_bbar;
  p.a_log = Tensor<T>::zeros({c, n_state});
  for (i64 ch = 0; ch < c; ++ch) {
    for (i64 n = 0; n < n_state; ++n) {
      p.a_log.data()[ch * n_state + n] = (T)std::log((double)(n + 1));
    }
  }
  p.d = Tensor<T>::full({c}, T(1));
  const double bound = 1.0 / std::sqrt((double)c);
  auto fill_uniform = [&](Tensor<T>& t) {
    for (i64 i = 0; i < t.size(); ++i) t.data()[i] = (T)rng.uniform(-bound, bound);
  };
  p.w_b = Tensor<T>::zeros({c, n_state});
  p.w_c = Tensor<T>::zeros({c, n_state});
  p.w_dt = Tensor<T>::zeros({c, c});
  fill_uniform(p.w_b);
  fill_uniform(p.w_c);
  fill_uniform(p.w_dt);
  p.b_dt = Tensor<T>::zeros({c});
  for (i64 i = 0; i < c; ++i) {
    const double dt = rng.uniform(1e-3, 1e-1);
    // softplus preimage: log(exp(dt) - 1).
    p.b_dt.data()[i] = (T)std::log(std::expm1(dt));
  }
  return p;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> discretize(const Tensor<T>& delta, const Tensor<T>& a,
                                           const Tensor<T>& b) {
  if (delta.shape() != a.shape() || delta.shape() != b.shape()) {
    throw ShapeError("discretize: delta, a, b must share a shape");
  }
  for (i64 i = 0; i < delta.size(); ++i) {
    if (!(delta.data()[i] > T(0))) {
      throw ShapeError(strfmt("discretize: non-positive delta at %lld", (long long)i));
    }
  }
  Tensor<T> a_bar = ops::exp(ops::mul(delta, a));
  Tensor<T> b_bar = ops::mul(delta, b);
  return {a_bar, b_bar};
}

template <typename T>
ScanSequence<T> project_params(const Tensor<T>& tokens, const SsmParams<T>& p) {
  if (tokens.ndim() != 2 || tokens.dim(1) != p.w_dt.dim(0)) {
    throw ShapeError(strfmt("project_params: tokens %s incompatible with C=%lld",
                            shape_str(tokens.shape()).c_str(), (long long)p.w_dt.dim(0)));
  }
  ScanSequence<T> s;
  s.b = ops::linear(tokens, p.w_b, Tensor<T>());
  s.c = ops::linear(tokens, p.w_c, Tensor<T>());
  s.delta = ops::softplus(ops::linear(tokens, p.w_dt, p.b_dt));
  return s;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& a,
                         const Tensor<T>& b, const Tensor<T>& c, const Tensor<T>& skip,
                         bool exact_bbar) {
  if (u.ndim() != 2 || delta.shape() != u.shape()) {
    throw ShapeError("selective_scan: u and delta must be equal [L,C]");
  }
  const i64 l = u.dim(0), ch = u.dim(1);
  if (a.ndim() != 2 || a.dim(0) != ch) throw ShapeError("selective_scan: a must be [C,N]");
  const i64 n = a.dim(1);
  if (b.ndim() != 2 || b.dim(0) != l || b.dim(1) != n || c.shape() != b.shape()) {
    throw ShapeError("selective_scan: b and c must be [L,N]");
  }
  if (skip.size() != ch) throw ShapeError("selective_scan: skip must be [C]");
  for (i64 i = 0; i < delta.size(); ++i) {
    if (!(delta.data()[i] > T(0))) {
      throw ShapeError(strfmt("selective_scan: non-positive delta at %lld", (long long)i));
    }
  }

  kernels::ScanDims dims;
  dims.l = l;
  dims.c = ch;
  dims.n = n;
  dims.exact_bbar = exact_bbar;

  Tensor<T> y = Tensor<T>::zeros({l, ch});
  // Post-update states, kept for the reverse sweep.
  auto h = std::make_shared<std::vector<T>>(static_cast<std::size_t>(l * ch * n));
  kernels::selective_scan_forward(dims, u.data(), delta.data(), a.data(), b.data(), c.data(),
                                  skip.data(), y.data(), h->data());

  const bool track = recording<T>() &&
                     (u.requires_grad() || delta.requires_grad() || a.requires_grad() ||
                      b.requires_grad() || c.requires_grad() || skip.requires_grad());
  if (track) {
    y.set_requires_grad(true);
    Tape<T>::active()->record(y, [u = u, delta = delta, a = a, b = b, c = c, skip = skip, y, h,
                                  dims]() mutable {
      const T* gy = y.storage()->grad.data();
      std::vector<T> gu(static_cast<std::size_t>(u.size()));
      std::vector<T> gdelta(static_cast<std::size_t>(delta.size()));
      std::vector<T> ga(static_cast<std::size_t>(a.size()));
      std::vector<T> gb(static_cast<std::size_t>(b.size()));
      std::vector<T> gc(static_cast<std::size_t>(c.size()));
      std::vector<T> gskip(static_cast<std::size_t>(skip.size()));
      kernels::selective_scan_backward(dims, u.data(), delta.data(), a.data(), b.data(), c.data(),
                                       skip.data(), h->data(), gy, gu.data(), gdelta.data(),
                                       ga.data(), gb.data(), gc.data(), gskip.data());
      if (u.requires_grad()) u.add_grad(gu.data(), u.size());
      if (delta.requires_grad()) delta.add_grad(gdelta.data(), delta.size());
      if (a.requires_grad()) a.add_grad(ga.data(), a.size());
      if (b.requires_grad()) b.add_grad(gb.data(), b.size());
      if (c.requires_grad()) c.add_grad(gc.data(), c.size());
      if (skip.requires_grad()) skip.add_grad(gskip.data(), skip.size());
    });
  }
  return y;
}

template <typename T>
Tensor<T> s6_forward(const Tensor<T>& tokens, const SsmParams<T>& p) {
  ScanSequence<T> seq = project_params(tokens, p);
  Tensor<T> a = ops::neg(ops::exp(p.a_log));
  return selective_scan(tokens, seq.delta, a, seq.b, seq.c, p.d, p.exact_bbar);
}

#define MIR_INSTANTIATE_SSM(T)                                                                \
  template SsmParams<T> make_ssm_params<T>(i64, i64, CounterRng&, bool);                      \
  template std::pair<Tensor<T>, Tensor<T>> discretize<T>(const Tensor<T>&, const Tensor<T>&,  \
                                                         const Tensor<T>&);                   \
  template ScanSequence<T> project_params<T>(const Tensor<T>&, const SsmParams<T>&);          \
  template Tensor<T> selective_scan<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                       const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                       bool);                                                 \
  template Tensor<T> s6_forward<T>(const Tensor<T>&, const SsmParams<T>&);

MIR_INSTANTIATE_SSM(float)
MIR_INSTANTIATE_SSM(double)

#undef MIR_INSTANTIATE_SSM

}  // namespace mir::ssm
