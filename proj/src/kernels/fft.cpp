#include "mir/kernels/fft.hpp"

#include <cmath>
#include <vector>

#include "mir/par.hpp"

namespace mir::kernels {

template <typename T>
void fft1d_inplace(T* re, T* im, i64 n, bool inverse) {
  if (!is_pow2(n)) throw ShapeError(strfmt("fft: length %lld is not a power of two", (long long)n));
  // Bit-reversal permutation.
  for (i64 i = 1, j = 0; i < n; ++i) {
    i64 bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (i64 len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * 3.14159265358979323846 / (double)len;
    // Twiddles are evaluated in double regardless of T so that both
    // precisions share one rounding path per factor.
    const double wr0 = std::cos(ang), wi0 = std::sin(ang);
    for (i64 i = 0; i < n; i += len) {
      double wr = 1.0, wi = 0.0;
      for (i64 k = 0; k < len / 2; ++k) {
        const i64 a = i + k, b = i + k + len / 2;
        const double ur = (double)re[a], ui = (double)im[a];
        const double vr = (double)re[b] * wr - (double)im[b] * wi;
        const double vi = (double)re[b] * wi + (double)im[b] * wr;
        re[a] = (T)(ur + vr);
        im[a] = (T)(ui + vi);
        re[b] = (T)(ur - vr);
        im[b] = (T)(ui - vi);
        const double nwr = wr * wr0 - wi * wi0;
        wi = wr * wi0 + wi * wr0;
        wr = nwr;
      }
    }
  }
}

namespace {

template <typename T>
void fft_row(T* y, i64 w, i64 row, bool inverse, T* sre, T* sim) {
  T* base = y + row * w * 2;
  for (i64 j = 0; j < w; ++j) {
    sre[j] = base[j * 2 + 0];
    sim[j] = base[j * 2 + 1];
  }
  fft1d_inplace(sre, sim, w, inverse);
  for (i64 j = 0; j < w; ++j) {
    base[j * 2 + 0] = sre[j];
    base[j * 2 + 1] = sim[j];
  }
}

template <typename T>
void fft_col(T* y, i64 h, i64 w, i64 col, bool inverse, T* sre, T* sim) {
  for (i64 i = 0; i < h; ++i) {
    sre[i] = y[(i * w + col) * 2 + 0];
    sim[i] = y[(i * w + col) * 2 + 1];
  }
  fft1d_inplace(sre, sim, h, inverse);
  for (i64 i = 0; i < h; ++i) {
    y[(i * w + col) * 2 + 0] = sre[i];
    y[(i * w + col) * 2 + 1] = sim[i];
  }
}

}  // namespace

template <typename T>
void fft2_serial(const T* x, T* y, i64 h, i64 w, bool inverse) {
  if (!is_pow2(h) || !is_pow2(w)) {
    throw ShapeError(strfmt("fft2: %lldx%lld is not a power-of-two grid", (long long)h,
                            (long long)w));
  }
  const i64 total = h * w * 2;
  if (y != x) {
    for (i64 i = 0; i < total; ++i) y[i] = x[i];
  }
  std::vector<T> sre((size_t)std::max(h, w)), sim((size_t)std::max(h, w));
  for (i64 r = 0; r < h; ++r) fft_row(y, w, r, inverse, sre.data(), sim.data());
  for (i64 c = 0; c < w; ++c) fft_col(y, h, w, c, inverse, sre.data(), sim.data());
  const T scale = (T)(1.0 / std::sqrt((double)h * (double)w));
  for (i64 i = 0; i < total; ++i) y[i] *= scale;
}

template <typename T>
void fft2_omp(const T* x, T* y, i64 h, i64 w, bool inverse) {
  if (!is_pow2(h) || !is_pow2(w)) {
    throw ShapeError(strfmt("fft2: %lldx%lld is not a power-of-two grid", (long long)h,
                            (long long)w));
  }
  const i64 total = h * w * 2;
  if (y != x) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < total; ++i) y[i] = x[i];
  }
#pragma omp parallel
  {
    std::vector<T> sre((size_t)std::max(h, w)), sim((size_t)std::max(h, w));
#pragma omp for schedule(static)
    for (i64 r = 0; r < h; ++r) fft_row(y, w, r, inverse, sre.data(), sim.data());
#pragma omp for schedule(static)
    for (i64 c = 0; c < w; ++c) fft_col(y, h, w, c, inverse, sre.data(), sim.data());
  }
  const T scale = (T)(1.0 / std::sqrt((double)h * (double)w));
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < total; ++i) y[i] *= scale;
}

template <typename T>
void fft2(const T* x, T* y, i64 h, i64 w, bool inverse) {
  if (par::omp_enabled()) {
    fft2_omp(x, y, h, w, inverse);
  } else {
    fft2_serial(x, y, h, w, inverse);
  }
}

#define MIR_INSTANTIATE_FFT(T)                                  \
  template void fft1d_inplace<T>(T*, T*, i64, bool);            \
  template void fft2_serial<T>(const T*, T*, i64, i64, bool);   \
  template void fft2_omp<T>(const T*, T*, i64, i64, bool);      \
  template void fft2<T>(const T*, T*, i64, i64, bool);

MIR_INSTANTIATE_FFT(float)
MIR_INSTANTIATE_FFT(double)

#undef MIR_INSTANTIATE_FFT

}  // namespace mir::kernels
