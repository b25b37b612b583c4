// Times every compute kernel on its serial reference and its OpenMP variant
// and verifies the two produce bitwise-identical outputs.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "mir/kernels/conv2d.hpp"
#include "mir/kernels/fft.hpp"
#include "mir/kernels/radon.hpp"
#include "mir/kernels/scan.hpp"
#include "mir/par.hpp"
#include "mir/rng.hpp"

using namespace mir;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<float> random_vec(i64 n, u64 stream) {
  CounterRng rng(StreamKey{7, stream, 0, 0});
  std::vector<float> v((std::size_t)n);
  for (auto& x : v) x = (float)rng.uniform(-1.0, 1.0);
  return v;
}

struct Row {
  std::string name;
  double serial_ms, omp_ms;
  bool bitwise;
};

template <typename Fn>
Row bench(const std::string& name, i64 out_len, int repeats, Fn&& run) {
  std::vector<float> serial_out((std::size_t)out_len), omp_out((std::size_t)out_len);
  auto time_side = [&](bool omp, std::vector<float>& out) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
      std::fill(out.begin(), out.end(), 0.0f);
      const double t0 = now_ms();
      run(omp, out.data());
      best = std::min(best, now_ms() - t0);
    }
    return best;
  };
  Row row;
  row.name = name;
  row.serial_ms = time_side(false, serial_out);
  row.omp_ms = time_side(true, omp_out);
  row.bitwise = std::memcmp(serial_out.data(), omp_out.data(), serial_out.size() * 4) == 0;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = 5;
  if (argc > 1) repeats = std::max(1, std::atoi(argv[1]));
  std::printf("threads available: %d, repeats: %d\n\n", par::max_threads(), repeats);

  std::vector<Row> rows;

  {
    kernels::Conv2dSpec s;
    s.h = s.w = 128;
    s.cin = 16;
    s.cout = 16;
    s.kh = s.kw = 3;
    s.pad = 1;
    const auto x = random_vec(s.h * s.w * s.cin, 1);
    const auto w = random_vec(s.kh * s.kw * s.cin * s.cout, 2);
    const auto b = random_vec(s.cout, 3);
    rows.push_back(bench("conv2d 128x128x16", s.out_h() * s.out_w() * s.cout, repeats,
                         [&](bool omp, float* out) {
                           if (omp)
                             kernels::conv2d_forward_omp(s, x.data(), w.data(), b.data(), out);
                           else
                             kernels::conv2d_forward_serial(s, x.data(), w.data(), b.data(), out);
                         }));
  }

  {
    const i64 h = 256, w = 256;
    const auto x = random_vec(h * w * 2, 4);
    rows.push_back(bench("fft2 256x256", h * w * 2, repeats, [&](bool omp, float* out) {
      if (omp)
        kernels::fft2_omp(x.data(), out, h, w, false);
      else
        kernels::fft2_serial(x.data(), out, h, w, false);
    }));
  }

  {
    kernels::ScanDims d;
    d.l = 4096;
    d.c = 32;
    d.n = 4;
    const auto u = random_vec(d.l * d.c, 5);
    auto delta = random_vec(d.l * d.c, 6);
    for (auto& v : delta) v = 0.01f + 0.05f * (v + 1.0f);
    auto a = random_vec(d.c * d.n, 7);
    for (auto& v : a) v = -0.5f - 0.5f * (v + 1.0f);
    const auto b = random_vec(d.l * d.n, 8);
    const auto c = random_vec(d.l * d.n, 9);
    const auto skip = random_vec(d.c, 10);
    std::vector<float> h((std::size_t)(d.l * d.c * d.n));
    rows.push_back(bench("selective scan L=4096 C=32", d.l * d.c, repeats,
                         [&](bool omp, float* out) {
                           if (omp)
                             kernels::selective_scan_forward_omp(d, u.data(), delta.data(),
                                                                 a.data(), b.data(), c.data(),
                                                                 skip.data(), out, h.data());
                           else
                             kernels::selective_scan_forward_serial(d, u.data(), delta.data(),
                                                                    a.data(), b.data(), c.data(),
                                                                    skip.data(), out, h.data());
                         }));
  }

  {
    kernels::CtGeom g;
    g.h = g.w = 128;
    g.n_views = 90;
    g.n_det = 192;
    g.det_pitch = 4.4 * 128 / 192;
    g.dist_source_center = 256;
    g.dist_source_detector = 512;
    const auto img = random_vec(g.h * g.w, 11);
    rows.push_back(bench("radon 128x128, 90 views", g.n_views * g.n_det, repeats,
                         [&](bool omp, float* out) {
                           if (omp)
                             kernels::radon_forward_omp(g, img.data(), out);
                           else
                             kernels::radon_forward_serial(g, img.data(), out);
                         }));
    const auto sino = random_vec(g.n_views * g.n_det, 12);
    rows.push_back(bench("backproject 128x128, 90 views", g.h * g.w, repeats,
                         [&](bool omp, float* out) {
                           if (omp)
                             kernels::radon_adjoint_omp(g, sino.data(), out);
                           else
                             kernels::radon_adjoint_serial(g, sino.data(), out);
                         }));
    rows.push_back(bench("fbp 128x128, 90 views", g.h * g.w, repeats, [&](bool omp, float* out) {
      if (omp)
        kernels::fbp_omp(g, sino.data(), out, false);
      else
        kernels::fbp_serial(g, sino.data(), out, false);
    }));
  }

  std::printf("%-32s %12s %12s %9s %9s\n", "kernel", "serial ms", "openmp ms", "speedup",
              "bitwise");
  bool all_match = true;
  for (const Row& r : rows) {
    std::printf("%-32s %12.3f %12.3f %8.2fx %9s\n", r.name.c_str(), r.serial_ms, r.omp_ms,
                r.serial_ms / r.omp_ms, r.bitwise ? "yes" : "NO");
    all_match = all_match && r.bitwise;
  }
  if (!all_match) {
    std::printf("\nserial and OpenMP outputs diverged\n");
    return 1;
  }
  return 0;
}
