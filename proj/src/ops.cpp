#include "mir/ops.hpp"

#include <cmath>

#include "mir/kernels/conv2d.hpp"
#include "mir/kernels/fft.hpp"

namespace mir::ops {

namespace {

template <typename T>
bool want_grad(std::initializer_list<const Tensor<T>*> ins) {
  if (!recording<T>()) return false;
  for (const Tensor<T>* t : ins) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record(Tensor<T>& out, std::function<void()> fn) {
  out.set_requires_grad(true);
  Tape<T>::active()->record(out, std::move(fn));
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Shape contract for elementwise pairs: identical shapes, or either side a
// single element that broadcasts.
template <typename T>
Shape binary_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (a.size() == 1) return b.shape();
  if (b.size() == 1) return a.shape();
  throw ShapeError(strfmt("%s: incompatible shapes %s and %s", op, shape_str(a.shape()).c_str(),
                          shape_str(b.shape()).c_str()));
}

template <typename T>
inline T pick(const Tensor<T>& t, i64 i) {
  return t.size() == 1 ? t.data()[0] : t.data()[i];
}

// Accumulates an elementwise gradient into a possibly-broadcast operand.
template <typename T, typename F>
void accum_binary_grad(Tensor<T>& t, i64 n, F contrib) {
  if (!t.requires_grad()) return;
  if (t.size() == 1) {
    T s = T(0);
    for (i64 i = 0; i < n; ++i) s += contrib(i);
    t.add_grad(&s, 1);
  } else {
    std::vector<T> g(static_cast<std::size_t>(n));
    for (i64 i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = contrib(i);
    t.add_grad(g.data(), n);
  }
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = Tensor<T>::zeros(binary_shape(a, b, "add"));
  const i64 n = out.size();
  for (i64 i = 0; i < n; ++i) out.data()[i] = pick(a, i) + pick(b, i);
  if (want_grad<T>({&a, &b})) {
    record(out, [a = a, b = b, out, n]() mutable {
      const auto& go = out.storage()->grad;
      accum_binary_grad(a, n, [&](i64 i) { return go[static_cast<std::size_t>(i)]; });
      accum_binary_grad(b, n, [&](i64 i) { return go[static_cast<std::size_t>(i)]; });
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = Tensor<T>::zeros(binary_shape(a, b, "sub"));
  const i64 n = out.size();
  for (i64 i = 0; i < n; ++i) out.data()[i] = pick(a, i) - pick(b, i);
  if (want_grad<T>({&a, &b})) {
    record(out, [a = a, b = b, out, n]() mutable {
      const auto& go = out.storage()->grad;
      accum_binary_grad(a, n, [&](i64 i) { return go[static_cast<std::size_t>(i)]; });
      accum_binary_grad(b, n, [&](i64 i) { return -go[static_cast<std::size_t>(i)]; });
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = Tensor<T>::zeros(binary_shape(a, b, "mul"));
  const i64 n = out.size();
  for (i64 i = 0; i < n; ++i) out.data()[i] = pick(a, i) * pick(b, i);
  if (want_grad<T>({&a, &b})) {
    record(out, [a = a, b = b, out, n]() mutable {
      const auto& go = out.storage()->grad;
      accum_binary_grad(a, n,
                        [&](i64 i) { return go[static_cast<std::size_t>(i)] * pick(b, i); });
      accum_binary_grad(b, n,
                        [&](i64 i) { return go[static_cast<std::size_t>(i)] * pick(a, i); });
    });
  }
  return out;
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = Tensor<T>::zeros(binary_shape(a, b, "div"));
  const i64 n = out.size();
  for (i64 i = 0; i < n; ++i) out.data()[i] = pick(a, i) / pick(b, i);
  if (want_grad<T>({&a, &b})) {
    record(out, [a = a, b = b, out, n]() mutable {
      const auto& go = out.storage()->grad;
      accum_binary_grad(a, n,
                        [&](i64 i) { return go[static_cast<std::size_t>(i)] / pick(b, i); });
      accum_binary_grad(b, n, [&](i64 i) {
        const T bv = pick(b, i);
        return -go[static_cast<std::size_t>(i)] * pick(a, i) / (bv * bv);
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const i64 n = x.size();
  for (i64 i = 0; i < n; ++i) out.data()[i] = -x.data()[i];
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, n]() mutable {
      const auto& go = out.storage()->grad;
      std::vector<T> g(static_cast<std::size_t>(n));
      for (i64 i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = -go[static_cast<std::size_t>(i)];
      x.add_grad(g.data(), n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const i64 n = x.size();
  for (i64 i = 0; i < n; ++i) out.data()[i] = x.data()[i] * c;
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, n, c]() mutable {
      const auto& go = out.storage()->grad;
      std::vector<T> g(static_cast<std::size_t>(n));
      for (i64 i = 0; i < n; ++i) {
        g[static_cast<std::size_t>(i)] = go[static_cast<std::size_t>(i)] * c;
      }
      x.add_grad(g.data(), n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const i64 n = x.size();
  for (i64 i = 0; i < n; ++i) out.data()[i] = x.data()[i] + c;
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, n]() mutable {
      const auto& go = out.storage()->grad;
      x.add_grad(go.data(), n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError(strfmt("matmul: incompatible shapes %s and %s",
                            shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
  }
  const i64 m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out = Tensor<T>::zeros({m, n});
  kernels::gemm(false, false, m, n, k, a.data(), b.data(), out.data());
  if (want_grad<T>({&a, &b})) {
    record(out, [a = a, b = b, out, m, n, k]() mutable {
      const T* go = out.storage()->grad.data();
      if (a.requires_grad()) {
        std::vector<T> ga(static_cast<std::size_t>(m * k));
        kernels::gemm(false, true, m, k, n, go, b.data(), ga.data());
        a.add_grad(ga.data(), m * k);
      }
      if (b.requires_grad()) {
        std::vector<T> gb(static_cast<std::size_t>(k * n));
        kernels::gemm(true, false, k, n, m, a.data(), go, gb.data());
        b.add_grad(gb.data(), k * n);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (x.ndim() < 1 || w.ndim() != 2) throw ShapeError("linear: x must have rows, w must be 2-d");
  const i64 in = w.dim(0), out_dim = w.dim(1);
  if (x.dim(x.ndim() - 1) != in) {
    throw ShapeError(strfmt("linear: trailing extent %lld does not match weight %s",
                            (long long)x.dim(x.ndim() - 1), shape_str(w.shape()).c_str()));
  }
  if (bias.defined() && bias.size() != out_dim) throw ShapeError("linear: bias length mismatch");
  const i64 rows = x.size() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  kernels::gemm(false, false, rows, out_dim, in, x.data(), w.data(), out.data());
  if (bias.defined()) {
    for (i64 r = 0; r < rows; ++r) {
      for (i64 j = 0; j < out_dim; ++j) out.data()[r * out_dim + j] += bias.data()[j];
    }
  }
  if (want_grad<T>({&x, &w, &bias})) {
    record(out, [x = x, w = w, bias = bias, out, rows, in, out_dim]() mutable {
      const T* go = out.storage()->grad.data();
      if (x.requires_grad()) {
        std::vector<T> gx(static_cast<std::size_t>(rows * in));
        kernels::gemm(false, true, rows, in, out_dim, go, w.data(), gx.data());
        x.add_grad(gx.data(), rows * in);
      }
      if (w.requires_grad()) {
        std::vector<T> gw(static_cast<std::size_t>(in * out_dim));
        kernels::gemm(true, false, in, out_dim, rows, x.data(), go, gw.data());
        w.add_grad(gw.data(), in * out_dim);
      }
      if (bias.defined() && bias.requires_grad()) {
        std::vector<T> gb(static_cast<std::size_t>(out_dim), T(0));
        for (i64 r = 0; r < rows; ++r) {
          for (i64 j = 0; j < out_dim; ++j) gb[static_cast<std::size_t>(j)] += go[r * out_dim + j];
        }
        bias.add_grad(gb.data(), out_dim);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, i64 stride,
                 i64 pad, i64 groups) {
  if (x.ndim() != 3 || w.ndim() != 4) {
    throw ShapeError("conv2d: x must be [h,w,c], weight [kh,kw,cin/groups,cout]");
  }
  kernels::Conv2dSpec spec;
  spec.n = 1;
  spec.h = x.dim(0);
  spec.w = x.dim(1);
  spec.cin = x.dim(2);
  spec.kh = w.dim(0);
  spec.kw = w.dim(1);
  spec.cout = w.dim(3);
  spec.stride = stride;
  spec.pad = pad;
  spec.groups = groups;
  spec.validate();
  if (w.dim(2) != spec.cin_per_group()) {
    throw ShapeError(strfmt("conv2d: weight %s does not match input channels %lld with %lld groups",
                            shape_str(w.shape()).c_str(), (long long)spec.cin,
                            (long long)groups));
  }
  if (bias.defined() && bias.size() != spec.cout) throw ShapeError("conv2d: bias length mismatch");
  Tensor<T> out = Tensor<T>::zeros({spec.out_h(), spec.out_w(), spec.cout});
  kernels::conv2d_forward(spec, x.data(), w.data(), bias.defined() ? bias.data() : nullptr,
                          out.data());
  if (want_grad<T>({&x, &w, &bias})) {
    record(out, [x = x, w = w, bias = bias, out, spec]() mutable {
      const T* go = out.storage()->grad.data();
      if (x.requires_grad()) {
        std::vector<T> gx(static_cast<std::size_t>(x.size()));
        kernels::conv2d_dinput(spec, go, w.data(), gx.data());
        x.add_grad(gx.data(), x.size());
      }
      if (w.requires_grad()) {
        std::vector<T> gw(static_cast<std::size_t>(w.size()));
        kernels::conv2d_dweight(spec, go, x.data(), gw.data());
        w.add_grad(gw.data(), w.size());
      }
      if (bias.defined() && bias.requires_grad()) {
        std::vector<T> gb(static_cast<std::size_t>(spec.cout));
        kernels::conv2d_dbias(spec, go, gb.data());
        bias.add_grad(gb.data(), spec.cout);
      }
    });
  }
  return out;
}

namespace {

// out[i*r+di, j*r+dj, k] = in[i, j, (di*r+dj)*c + k]
template <typename T>
void d2s_copy(const T* in, T* out, i64 h, i64 w, i64 c, i64 r, bool invert) {
  for (i64 i = 0; i < h; ++i) {
    for (i64 j = 0; j < w; ++j) {
      for (i64 di = 0; di < r; ++di) {
        for (i64 dj = 0; dj < r; ++dj) {
          for (i64 k = 0; k < c; ++k) {
            const i64 lo = ((i * w + j) * r * r + di * r + dj) * c + k;
            const i64 hi = (((i * r + di) * (w * r)) + (j * r + dj)) * c + k;
            if (invert) {
              out[lo] = in[hi];
            } else {
              out[hi] = in[lo];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& x, i64 r) {
  if (x.ndim() != 3 || r <= 0 || x.dim(2) % (r * r) != 0) {
    throw ShapeError(strfmt("depth_to_space: shape %s incompatible with factor %lld",
                            shape_str(x.shape()).c_str(), (long long)r));
  }
  const i64 h = x.dim(0), w = x.dim(1), c = x.dim(2) / (r * r);
  Tensor<T> out = Tensor<T>::zeros({h * r, w * r, c});
  d2s_copy(x.data(), out.data(), h, w, c, r, false);
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, h, w, c, r]() mutable {
      std::vector<T> gx(static_cast<std::size_t>(x.size()));
      d2s_copy(out.storage()->grad.data(), gx.data(), h, w, c, r, true);
      x.add_grad(gx.data(), x.size());
    });
  }
  return out;
}

template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& x, i64 r) {
  if (x.ndim() != 3 || r <= 0 || x.dim(0) % r != 0 || x.dim(1) % r != 0) {
    throw ShapeError(strfmt("space_to_depth: shape %s incompatible with factor %lld",
                            shape_str(x.shape()).c_str(), (long long)r));
  }
  const i64 h = x.dim(0) / r, w = x.dim(1) / r, c = x.dim(2);
  Tensor<T> out = Tensor<T>::zeros({h, w, c * r * r});
  d2s_copy(x.data(), out.data(), h, w, c, r, true);
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, h, w, c, r]() mutable {
      std::vector<T> gx(static_cast<std::size_t>(x.size()));
      d2s_copy(out.storage()->grad.data(), gx.data(), h, w, c, r, false);
      x.add_grad(gx.data(), x.size());
    });
  }
  return out;
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  if (x.ndim() < 1) throw ShapeError("layernorm: rank-0 input");
  const i64 c = x.dim(x.ndim() - 1);
  if (gamma.size() != c || beta.size() != c) {
    throw ShapeError(strfmt("layernorm: affine length %lld/%lld does not match channels %lld",
                            (long long)gamma.size(), (long long)beta.size(), (long long)c));
  }
  const i64 rows = x.size() / c;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  // Saved per row for backward: 1/sqrt(var), with 0 flagging the
  // zero-variance convention, plus the row mean.
  auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  auto mu = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * c;
    T m = T(0);
    for (i64 j = 0; j < c; ++j) m += xr[j];
    m /= (T)c;
    T var = T(0);
    for (i64 j = 0; j < c; ++j) var += (xr[j] - m) * (xr[j] - m);
    var /= (T)c;
    T rs = T(0);
    if (var >= T(1e-12)) rs = T(1) / std::sqrt(var);
    (*mu)[static_cast<std::size_t>(r)] = m;
    (*rstd)[static_cast<std::size_t>(r)] = rs;
    T* yr = out.data() + r * c;
    for (i64 j = 0; j < c; ++j) {
      const T xhat = (xr[j] - m) * rs;
      yr[j] = gamma.data()[j] * xhat + beta.data()[j];
    }
  }
  if (want_grad<T>({&x, &gamma, &beta})) {
    record(out, [x = x, gamma = gamma, beta = beta, out, rows, c, rstd, mu]() mutable {
      const T* go = out.storage()->grad.data();
      std::vector<T> gx(static_cast<std::size_t>(x.size()), T(0));
      std::vector<T> gg(static_cast<std::size_t>(c), T(0));
      std::vector<T> gb(static_cast<std::size_t>(c), T(0));
      for (i64 r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * c;
        const T* gr = go + r * c;
        const T rs = (*rstd)[static_cast<std::size_t>(r)];
        const T m = (*mu)[static_cast<std::size_t>(r)];
        T mean_dxh = T(0), mean_dxh_xh = T(0);
        for (i64 j = 0; j < c; ++j) {
          const T xhat = (xr[j] - m) * rs;
          const T dxhat = gr[j] * gamma.data()[j];
          gg[static_cast<std::size_t>(j)] += gr[j] * xhat;
          gb[static_cast<std::size_t>(j)] += gr[j];
          mean_dxh += dxhat;
          mean_dxh_xh += dxhat * xhat;
        }
        mean_dxh /= (T)c;
        mean_dxh_xh /= (T)c;
        if (rs != T(0)) {
          for (i64 j = 0; j < c; ++j) {
            const T xhat = (xr[j] - m) * rs;
            const T dxhat = gr[j] * gamma.data()[j];
            gx[static_cast<std::size_t>(r * c + j)] =
                rs * (dxhat - mean_dxh - xhat * mean_dxh_xh);
          }
        }
      }
      if (x.requires_grad()) x.add_grad(gx.data(), x.size());
      if (gamma.requires_grad()) gamma.add_grad(gg.data(), c);
      if (beta.requires_grad()) beta.add_grad(gb.data(), c);
    });
  }
  return out;
}

namespace {

template <typename T, typename FwdF, typename GradF>
Tensor<T> unary_op(const Tensor<T>& x, FwdF fwd, GradF grad_from_x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const i64 n = x.size();
  for (i64 i = 0; i < n; ++i) out.data()[i] = fwd(x.data()[i]);
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, n, grad_from_x]() mutable {
      const auto& go = out.storage()->grad;
      std::vector<T> g(static_cast<std::size_t>(n));
      for (i64 i = 0; i < n; ++i) {
        g[static_cast<std::size_t>(i)] =
            go[static_cast<std::size_t>(i)] * grad_from_x(x.data()[i], out.data()[i]);
      }
      x.add_grad(g.data(), n);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return v * stable_sigmoid(v); },
      [](T v, T) {
        const T s = stable_sigmoid(v);
        return s * (T(1) + v * (T(1) - s));
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return stable_sigmoid(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary_op(
      x,
      [](T v) {
        // Large inputs pass through to avoid exp overflow.
        if (v > T(20)) return v;
        return std::log1p(std::exp(v));
      },
      [](T v, T) { return stable_sigmoid(v); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(1) / (T(2) * y); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  if (lo > hi) throw ShapeError("clamp: lo exceeds hi");
  return unary_op(
      x, [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const i64 n = x.size();
  T s = T(0);
  for (i64 i = 0; i < n; ++i) s += x.data()[i];
  Tensor<T> out = Tensor<T>::scalar(s);
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, n]() mutable {
      const T g = out.storage()->grad[0];
      std::vector<T> gx(static_cast<std::size_t>(n), g);
      x.add_grad(gx.data(), n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const i64 n = x.size();
  T s = T(0);
  for (i64 i = 0; i < n; ++i) s += x.data()[i];
  Tensor<T> out = Tensor<T>::scalar(s / (T)n);
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, n]() mutable {
      const T g = out.storage()->grad[0] / (T)n;
      std::vector<T> gx(static_cast<std::size_t>(n), g);
      x.add_grad(gx.data(), n);
    });
  }
  return out;
}

namespace {

template <typename T>
void axis_extents(const Tensor<T>& x, i64 axis, i64& outer, i64& ax, i64& inner) {
  if (axis < 0 || axis >= x.ndim()) throw ShapeError("axis out of range");
  outer = 1;
  for (i64 i = 0; i < axis; ++i) outer *= x.dim((int)i);
  ax = x.dim((int)axis);
  inner = 1;
  for (i64 i = axis + 1; i < x.ndim(); ++i) inner *= x.dim((int)i);
}

}  // namespace

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, i64 axis) {
  if (a.ndim() != b.ndim()) throw ShapeError("concat: rank mismatch");
  for (int i = 0; i < a.ndim(); ++i) {
    if (i != axis && a.dim(i) != b.dim(i)) {
      throw ShapeError(strfmt("concat: shapes %s and %s differ off axis %lld",
                              shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str(),
                              (long long)axis));
    }
  }
  i64 outer, a_ax, inner;
  axis_extents(a, axis, outer, a_ax, inner);
  const i64 b_ax = b.dim((int)axis);
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(axis)] = a_ax + b_ax;
  Tensor<T> out = Tensor<T>::zeros(shape);
  const i64 o_ax = a_ax + b_ax;
  for (i64 o = 0; o < outer; ++o) {
    for (i64 j = 0; j < a_ax; ++j) {
      for (i64 k = 0; k < inner; ++k) {
        out.data()[(o * o_ax + j) * inner + k] = a.data()[(o * a_ax + j) * inner + k];
      }
    }
    for (i64 j = 0; j < b_ax; ++j) {
      for (i64 k = 0; k < inner; ++k) {
        out.data()[(o * o_ax + a_ax + j) * inner + k] = b.data()[(o * b_ax + j) * inner + k];
      }
    }
  }
  if (want_grad<T>({&a, &b})) {
    record(out, [a = a, b = b, out, outer, a_ax, b_ax, inner]() mutable {
      const T* go = out.storage()->grad.data();
      const i64 o_ax = a_ax + b_ax;
      if (a.requires_grad()) {
        std::vector<T> ga(static_cast<std::size_t>(a.size()));
        for (i64 o = 0; o < outer; ++o) {
          for (i64 j = 0; j < a_ax; ++j) {
            for (i64 k = 0; k < inner; ++k) {
              ga[static_cast<std::size_t>((o * a_ax + j) * inner + k)] =
                  go[(o * o_ax + j) * inner + k];
            }
          }
        }
        a.add_grad(ga.data(), a.size());
      }
      if (b.requires_grad()) {
        std::vector<T> gb(static_cast<std::size_t>(b.size()));
        for (i64 o = 0; o < outer; ++o) {
          for (i64 j = 0; j < b_ax; ++j) {
            for (i64 k = 0; k < inner; ++k) {
              gb[static_cast<std::size_t>((o * b_ax + j) * inner + k)] =
                  go[(o * o_ax + a_ax + j) * inner + k];
            }
          }
        }
        b.add_grad(gb.data(), b.size());
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, i64 axis, i64 start, i64 len) {
  i64 outer, ax, inner;
  axis_extents(x, axis, outer, ax, inner);
  if (start < 0 || len <= 0 || start + len > ax) {
    throw ShapeError(strfmt("slice: [%lld, %lld) out of range for extent %lld", (long long)start,
                            (long long)(start + len), (long long)ax));
  }
  Shape shape = x.shape();
  shape[static_cast<std::size_t>(axis)] = len;
  Tensor<T> out = Tensor<T>::zeros(shape);
  for (i64 o = 0; o < outer; ++o) {
    for (i64 j = 0; j < len; ++j) {
      for (i64 k = 0; k < inner; ++k) {
        out.data()[(o * len + j) * inner + k] = x.data()[(o * ax + start + j) * inner + k];
      }
    }
  }
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, outer, ax, inner, start, len]() mutable {
      const T* go = out.storage()->grad.data();
      std::vector<T> gx(static_cast<std::size_t>(x.size()), T(0));
      for (i64 o = 0; o < outer; ++o) {
        for (i64 j = 0; j < len; ++j) {
          for (i64 k = 0; k < inner; ++k) {
            gx[static_cast<std::size_t>((o * ax + start + j) * inner + k)] =
                go[(o * len + j) * inner + k];
          }
        }
      }
      x.add_grad(gx.data(), x.size());
    });
  }
  return out;
}

namespace {

template <typename T>
void permute_copy(const T* in, T* out, const Shape& in_shape, const std::vector<i64>& perm) {
  const int nd = (int)in_shape.size();
  Shape out_shape(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd; ++i) out_shape[(std::size_t)i] = in_shape[(std::size_t)perm[(std::size_t)i]];
  std::vector<i64> in_strides(static_cast<std::size_t>(nd), 1);
  for (int i = nd - 2; i >= 0; --i) {
    in_strides[(std::size_t)i] = in_strides[(std::size_t)(i + 1)] * in_shape[(std::size_t)(i + 1)];
  }
  const i64 total = numel(in_shape);
  std::vector<i64> idx(static_cast<std::size_t>(nd), 0);
  for (i64 lin = 0; lin < total; ++lin) {
    // idx enumerates the output in row-major order.
    i64 src = 0;
    for (int i = 0; i < nd; ++i) {
      src += idx[(std::size_t)i] * in_strides[(std::size_t)perm[(std::size_t)i]];
    }
    out[lin] = in[src];
    for (int i = nd - 1; i >= 0; --i) {
      if (++idx[(std::size_t)i] < out_shape[(std::size_t)i]) break;
      idx[(std::size_t)i] = 0;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<i64>& perm) {
  const int nd = x.ndim();
  if ((int)perm.size() != nd) throw ShapeError("permute: wrong permutation length");
  std::vector<bool> seen(static_cast<std::size_t>(nd), false);
  for (i64 p : perm) {
    if (p < 0 || p >= nd || seen[(std::size_t)p]) throw ShapeError("permute: invalid permutation");
    seen[(std::size_t)p] = true;
  }
  Shape shape(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd; ++i) shape[(std::size_t)i] = x.dim((int)perm[(std::size_t)i]);
  Tensor<T> out = Tensor<T>::zeros(shape);
  permute_copy(x.data(), out.data(), x.shape(), perm);
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, perm, nd]() mutable {
      std::vector<i64> inv(static_cast<std::size_t>(nd));
      for (int i = 0; i < nd; ++i) inv[(std::size_t)perm[(std::size_t)i]] = i;
      std::vector<T> gx(static_cast<std::size_t>(x.size()));
      permute_copy(out.storage()->grad.data(), gx.data(), out.shape(), inv);
      x.add_grad(gx.data(), x.size());
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError(strfmt("reshape: %s incompatible with %s", shape_str(x.shape()).c_str(),
                            shape_str(shape).c_str()));
  }
  Tensor<T> out = Tensor<T>::from(shape, x.vec());
  if (want_grad<T>({&x})) {
    record(out, [x = x, out]() mutable {
      x.add_grad(out.storage()->grad.data(), x.size());
    });
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<i64>& idx) {
  if (x.ndim() != 2) throw ShapeError("gather_rows: input must be [rows, cols]");
  const i64 l = x.dim(0), c = x.dim(1);
  for (i64 v : idx) {
    if (v < 0 || v >= l) throw ShapeError(strfmt("gather_rows: index %lld out of range", (long long)v));
  }
  const i64 m = (i64)idx.size();
  Tensor<T> out = Tensor<T>::zeros({m, c});
  for (i64 i = 0; i < m; ++i) {
    const T* src = x.data() + idx[(std::size_t)i] * c;
    T* dst = out.data() + i * c;
    for (i64 j = 0; j < c; ++j) dst[j] = src[j];
  }
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, idx, m, c]() mutable {
      const T* go = out.storage()->grad.data();
      std::vector<T> gx(static_cast<std::size_t>(x.size()), T(0));
      // Sequential scatter; repeated indices accumulate deterministically.
      for (i64 i = 0; i < m; ++i) {
        T* dst = gx.data() + idx[(std::size_t)i] * c;
        const T* src = go + i * c;
        for (i64 j = 0; j < c; ++j) dst[j] += src[j];
      }
      x.add_grad(gx.data(), x.size());
    });
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> fft2_impl(const Tensor<T>& x, bool inverse) {
  if (x.ndim() != 3 || x.dim(2) != 2) {
    throw ShapeError("fft2: input must be [h, w, 2] real-pair");
  }
  const i64 h = x.dim(0), w = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  kernels::fft2(x.data(), out.data(), h, w, inverse);
  if (want_grad<T>({&x})) {
    record(out, [x = x, out, h, w, inverse]() mutable {
      std::vector<T> gx(static_cast<std::size_t>(x.size()));
      kernels::fft2(out.storage()->grad.data(), gx.data(), h, w, !inverse);
      x.add_grad(gx.data(), x.size());
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> fft2(const Tensor<T>& x) {
  return fft2_impl(x, false);
}

template <typename T>
Tensor<T> ifft2(const Tensor<T>& x) {
  return fft2_impl(x, true);
}

template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
  return x.clone_data();
}

#define MIR_INSTANTIATE_OPS(T)                                                            \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> neg<T>(const Tensor<T>&);                                            \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                       \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                                  \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, i64, \
                               i64, i64);                                                 \
  template Tensor<T> depth_to_space<T>(const Tensor<T>&, i64);                            \
  template Tensor<T> space_to_depth<T>(const Tensor<T>&, i64);                            \
  template Tensor<T> layernorm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> silu<T>(const Tensor<T>&);                                           \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                        \
  template Tensor<T> softplus<T>(const Tensor<T>&);                                       \
  template Tensor<T> exp<T>(const Tensor<T>&);                                            \
  template Tensor<T> log<T>(const Tensor<T>&);                                            \
  template Tensor<T> sqrt<T>(const Tensor<T>&);                                           \
  template Tensor<T> abs<T>(const Tensor<T>&);                                            \
  template Tensor<T> clamp<T>(const Tensor<T>&, T, T);                                    \
  template Tensor<T> sum<T>(const Tensor<T>&);                                            \
  template Tensor<T> mean<T>(const Tensor<T>&);                                           \
  template Tensor<T> concat<T>(const Tensor<T>&, const Tensor<T>&, i64);                  \
  template Tensor<T> slice<T>(const Tensor<T>&, i64, i64, i64);                           \
  template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<i64>&);               \
  template Tensor<T> reshape<T>(const Tensor<T>&, const Shape&);                          \
  template Tensor<T> gather_rows<T>(const Tensor<T>&, const std::vector<i64>&);           \
  template Tensor<T> fft2<T>(const Tensor<T>&);                                           \
  template Tensor<T> ifft2<T>(const Tensor<T>&);                                          \
  template Tensor<T> detach<T>(const Tensor<T>&);

MIR_INSTANTIATE_OPS(float)
MIR_INSTANTIATE_OPS(double)

#undef MIR_INSTANTIATE_OPS

}  // namespace mir::ops
