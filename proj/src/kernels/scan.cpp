#include "mir/kernels/scan.hpp"

#include <cmath>
#include <vector>

#include "mir/par.hpp"

namespace mir::kernels {

namespace {

void check_dims(const ScanDims& d) {
  if (d.l <= 0 || d.c <= 0 || d.n <= 0) throw ShapeError("selective_scan: non-positive dims");
}

// One channel of the forward recurrence. State h lives in h_out[l, ch, :].
template <typename T>
inline void scan_channel_forward(const ScanDims& d, i64 ch, const T* u, const T* delta,
                                 const T* a, const T* b, const T* c_in, const T* skip, T* y,
                                 T* h_out) {
  const i64 N = d.n;
  const T* ac = a + ch * N;
  for (i64 l = 0; l < d.l; ++l) {
    const T dt = delta[l * d.c + ch];
    const T ul = u[l * d.c + ch];
    const T* bl = b + l * N;
    const T* cl = c_in + l * N;
    const T* hp = l > 0 ? h_out + ((l - 1) * d.c + ch) * N : nullptr;
    T* hl = h_out + (l * d.c + ch) * N;
    T acc = T(0);
    for (i64 j = 0; j < N; ++j) {
      const T abar = std::exp(dt * ac[j]);
      T bbar;
      if (d.exact_bbar) {
        // (exp(dt*a) - 1) / a; the transition values are strictly negative
        // by construction so the quotient is well defined.
        bbar = (abar - T(1)) / ac[j] * bl[j];
      } else {
        bbar = dt * bl[j];
      }
      const T prev = hp ? hp[j] : T(0);
      const T h = abar * prev + bbar * ul;
      hl[j] = h;
      acc += cl[j] * h;
    }
    y[l * d.c + ch] = acc + skip[ch] * ul;
  }
}

// One channel of the reverse sweep. gb_ch and gc_ch are this channel's
// private [l, n] scratch; cross-channel reduction happens in the caller.
template <typename T>
inline void scan_channel_backward(const ScanDims& d, i64 ch, const T* u, const T* delta,
                                  const T* a, const T* b, const T* c_in, const T* skip,
                                  const T* h, const T* gy, T* gu, T* gdelta, T* ga, T* gskip,
                                  T* gb_ch, T* gc_ch, T* carry) {
  const i64 N = d.n;
  const T* ac = a + ch * N;
  T* gac = ga + ch * N;
  for (i64 j = 0; j < N; ++j) {
    gac[j] = T(0);
    carry[j] = T(0);
  }
  T gd_acc = T(0);
  for (i64 i = 0; i < d.l * N; ++i) {
    gb_ch[i] = T(0);
    gc_ch[i] = T(0);
  }
  for (i64 l = d.l - 1; l >= 0; --l) {
    const T dt = delta[l * d.c + ch];
    const T ul = u[l * d.c + ch];
    const T gyl = gy[l * d.c + ch];
    const T* bl = b + l * N;
    const T* cl = c_in + l * N;
    const T* hl = h + (l * d.c + ch) * N;
    const T* hp = l > 0 ? h + ((l - 1) * d.c + ch) * N : nullptr;
    T gu_acc = skip[ch] * gyl;
    T gdt_acc = T(0);
    for (i64 j = 0; j < N; ++j) {
      const T gh = cl[j] * gyl + carry[j];
      gc_ch[l * N + j] = hl[j] * gyl;
      const T abar = std::exp(dt * ac[j]);
      const T prev = hp ? hp[j] : T(0);
      const T g_abar = prev * gh;
      const T g_bbar = ul * gh;
      T bbar;
      if (d.exact_bbar) {
        const T coef = (abar - T(1)) / ac[j];
        bbar = coef * bl[j];
        // d coef / d dt = exp(dt*a); d coef / d a = (dt*exp(dt*a)*a - (exp(dt*a)-1)) / a^2.
        gdt_acc += g_abar * ac[j] * abar + g_bbar * bl[j] * abar;
        gac[j] += g_abar * dt * abar +
                  g_bbar * bl[j] * (dt * abar * ac[j] - (abar - T(1))) / (ac[j] * ac[j]);
        gb_ch[l * N + j] = g_bbar * coef;
      } else {
        bbar = dt * bl[j];
        gdt_acc += g_abar * ac[j] * abar + g_bbar * bl[j];
        gac[j] += g_abar * dt * abar;
        gb_ch[l * N + j] = g_bbar * dt;
      }
      gu_acc += bbar * gh;
      carry[j] = abar * gh;
    }
    gu[l * d.c + ch] = gu_acc;
    gdelta[l * d.c + ch] = gdt_acc;
    gd_acc += ul * gyl;
  }
  gskip[ch] = gd_acc;
}

}  // namespace

template <typename T>
void selective_scan_forward_serial(const ScanDims& d, const T* u, const T* delta, const T* a,
                                   const T* b, const T* c_in, const T* skip, T* y, T* h_out) {
  check_dims(d);
  for (i64 ch = 0; ch < d.c; ++ch) {
    scan_channel_forward(d, ch, u, delta, a, b, c_in, skip, y, h_out);
  }
}

template <typename T>
void selective_scan_forward_omp(const ScanDims& d, const T* u, const T* delta, const T* a,
                                const T* b, const T* c_in, const T* skip, T* y, T* h_out) {
  check_dims(d);
#pragma omp parallel for schedule(static)
  for (i64 ch = 0; ch < d.c; ++ch) {
    scan_channel_forward(d, ch, u, delta, a, b, c_in, skip, y, h_out);
  }
}

template <typename T>
void selective_scan_forward(const ScanDims& d, const T* u, const T* delta, const T* a, const T* b,
                            const T* c_in, const T* skip, T* y, T* h_out) {
  if (par::omp_enabled()) {
    selective_scan_forward_omp(d, u, delta, a, b, c_in, skip, y, h_out);
  } else {
    selective_scan_forward_serial(d, u, delta, a, b, c_in, skip, y, h_out);
  }
}

namespace {

// Shared by both backward variants so the reduction order over channels is
// one piece of code: scratch[ch] holds that channel's gb/gc, summed here in
// ascending channel order.
template <typename T>
void reduce_gb_gc(const ScanDims& d, const std::vector<T>& gb_all, const std::vector<T>& gc_all,
                  T* gb, T* gc) {
  const i64 ln = d.l * d.n;
  for (i64 i = 0; i < ln; ++i) {
    T sb = T(0), sc = T(0);
    for (i64 ch = 0; ch < d.c; ++ch) {
      sb += gb_all[(size_t)(ch * ln + i)];
      sc += gc_all[(size_t)(ch * ln + i)];
    }
    gb[i] = sb;
    gc[i] = sc;
  }
}

template <typename T>
void reduce_gb_gc_omp(const ScanDims& d, const std::vector<T>& gb_all, const std::vector<T>& gc_all,
                      T* gb, T* gc) {
  const i64 ln = d.l * d.n;
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < ln; ++i) {
    T sb = T(0), sc = T(0);
    for (i64 ch = 0; ch < d.c; ++ch) {
      sb += gb_all[(size_t)(ch * ln + i)];
      sc += gc_all[(size_t)(ch * ln + i)];
    }
    gb[i] = sb;
    gc[i] = sc;
  }
}

}  // namespace

template <typename T>
void selective_scan_backward_serial(const ScanDims& d, const T* u, const T* delta, const T* a,
                                    const T* b, const T* c_in, const T* skip, const T* h,
                                    const T* gy, T* gu, T* gdelta, T* ga, T* gb, T* gc, T* gskip) {
  check_dims(d);
  const i64 ln = d.l * d.n;
  std::vector<T> gb_all((size_t)(d.c * ln)), gc_all((size_t)(d.c * ln));
  std::vector<T> carry((size_t)d.n);
  for (i64 ch = 0; ch < d.c; ++ch) {
    scan_channel_backward(d, ch, u, delta, a, b, c_in, skip, h, gy, gu, gdelta, ga, gskip,
                          gb_all.data() + ch * ln, gc_all.data() + ch * ln, carry.data());
  }
  reduce_gb_gc(d, gb_all, gc_all, gb, gc);
}

template <typename T>
void selective_scan_backward_omp(const ScanDims& d, const T* u, const T* delta, const T* a,
                                 const T* b, const T* c_in, const T* skip, const T* h, const T* gy,
                                 T* gu, T* gdelta, T* ga, T* gb, T* gc, T* gskip) {
  check_dims(d);
  const i64 ln = d.l * d.n;
  std::vector<T> gb_all((size_t)(d.c * ln)), gc_all((size_t)(d.c * ln));
#pragma omp parallel
  {
    std::vector<T> carry((size_t)d.n);
#pragma omp for schedule(static)
    for (i64 ch = 0; ch < d.c; ++ch) {
      scan_channel_backward(d, ch, u, delta, a, b, c_in, skip, h, gy, gu, gdelta, ga, gskip,
                            gb_all.data() + ch * ln, gc_all.data() + ch * ln, carry.data());
    }
  }
  reduce_gb_gc_omp(d, gb_all, gc_all, gb, gc);
}

template <typename T>
void selective_scan_backward(const ScanDims& d, const T* u, const T* delta, const T* a, const T* b,
                             const T* c_in, const T* skip, const T* h, const T* gy, T* gu,
                             T* gdelta, T* ga, T* gb, T* gc, T* gskip) {
  if (par::omp_enabled()) {
    selective_scan_backward_omp(d, u, delta, a, b, c_in, skip, h, gy, gu, gdelta, ga, gb, gc,
                                gskip);
  } else {
    selective_scan_backward_serial(d, u, delta, a, b, c_in, skip, h, gy, gu, gdelta, ga, gb, gc,
                                   gskip);
  }
}

#define MIR_INSTANTIATE_SCAN(T)                                                                   \
  template void selective_scan_forward_serial<T>(const ScanDims&, const T*, const T*, const T*,   \
                                                 const T*, const T*, const T*, T*, T*);           \
  template void selective_scan_forward_omp<T>(const ScanDims&, const T*, const T*, const T*,      \
                                              const T*, const T*, const T*, T*, T*);              \
  template void selective_scan_forward<T>(const ScanDims&, const T*, const T*, const T*,          \
                                          const T*, const T*, const T*, T*, T*);                  \
  template void selective_scan_backward_serial<T>(const ScanDims&, const T*, const T*, const T*,  \
                                                  const T*, const T*, const T*, const T*,         \
                                                  const T*, T*, T*, T*, T*, T*, T*);              \
  template void selective_scan_backward_omp<T>(const ScanDims&, const T*, const T*, const T*,     \
                                               const T*, const T*, const T*, const T*, const T*,  \
                                               T*, T*, T*, T*, T*, T*);                           \
  template void selective_scan_backward<T>(const ScanDims&, const T*, const T*, const T*,         \
                                           const T*, const T*, const T*, const T*, const T*, T*,  \
                                           T*, T*, T*, T*, T*);

MIR_INSTANTIATE_SCAN(float)
MIR_INSTANTIATE_SCAN(double)

#undef MIR_INSTANTIATE_SCAN

}  // namespace mir::kernels
