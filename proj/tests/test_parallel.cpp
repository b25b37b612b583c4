// Serial and OpenMP kernel variants must agree bitwise: every output element
// is written by exactly one iteration and inner reductions run in the same
// order in both variants, so there is no tolerance to hide behind.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "helpers.hpp"
#include "mir/kernels/conv2d.hpp"
#include "mir/kernels/fft.hpp"
#include "mir/kernels/radon.hpp"
#include "mir/kernels/scan.hpp"
#include "mir/par.hpp"
#include "mir/rng.hpp"

using namespace mir;
using namespace mir::kernels;
using mir::testing::random_tensor;

namespace {

template <typename T>
std::vector<T> random_buf(size_t n, u64 seed, T lo = T(-1), T hi = T(1)) {
  auto t = random_tensor<T>({(i64)n}, seed, lo, hi);
  return t.vec();
}

template <typename T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
void check_conv_pair(const Conv2dSpec& s, u64 seed) {
  const size_t xn = (size_t)(s.n * s.h * s.w * s.cin);
  const size_t wn = (size_t)(s.kh * s.kw * s.cin_per_group() * s.cout);
  const size_t yn = (size_t)(s.n * s.out_h() * s.out_w() * s.cout);
  auto x = random_buf<T>(xn, seed);
  auto w = random_buf<T>(wn, seed + 1);
  auto bias = random_buf<T>((size_t)s.cout, seed + 2);
  auto gy = random_buf<T>(yn, seed + 3);

  std::vector<T> y_s(yn), y_p(yn);
  conv2d_forward_serial(s, x.data(), w.data(), bias.data(), y_s.data());
  conv2d_forward_omp(s, x.data(), w.data(), bias.data(), y_p.data());
  CHECK(same_bits(y_s, y_p));

  std::vector<T> dx_s(xn), dx_p(xn);
  conv2d_dinput_serial(s, gy.data(), w.data(), dx_s.data());
  conv2d_dinput_omp(s, gy.data(), w.data(), dx_p.data());
  CHECK(same_bits(dx_s, dx_p));

  std::vector<T> dw_s(wn), dw_p(wn);
  conv2d_dweight_serial(s, gy.data(), x.data(), dw_s.data());
  conv2d_dweight_omp(s, gy.data(), x.data(), dw_p.data());
  CHECK(same_bits(dw_s, dw_p));
}

CtGeom small_geom(i64 size, i64 n_views) {
  CtGeom g;
  g.h = size;
  g.w = size;
  g.n_views = n_views;
  g.n_det = size * 3 / 2;
  g.dist_source_center = 2.0 * (double)size;
  g.dist_source_detector = 4.0 * (double)size;
  const double half_diag = 0.5 * std::sqrt(2.0) * (double)size;
  const double fan = std::asin(half_diag / g.dist_source_center);
  g.det_pitch = 2.0 * g.dist_source_detector * std::tan(fan) * 1.01 / (double)g.n_det;
  g.step = 0.5;
  return g;
}

}  // namespace

TEST_CASE("conv2d serial and omp variants agree bitwise") {
  std::vector<Conv2dSpec> specs;
  // Padded 3x3, the workhorse shape.
  specs.push_back({2, 9, 7, 3, 5, 3, 3, 1, 1, 1});
  // Strided patch embedding, no padding.
  specs.push_back({1, 12, 12, 4, 8, 4, 4, 4, 0, 1});
  // Depthwise.
  specs.push_back({2, 8, 8, 6, 6, 3, 3, 1, 1, 6});
  // Grouped with several channels per group, asymmetric kernel, stride 2.
  specs.push_back({1, 10, 11, 4, 6, 5, 3, 2, 2, 2});
  // Single output pixel.
  specs.push_back({3, 3, 3, 2, 4, 3, 3, 1, 0, 1});
  u64 seed = 900;
  for (const auto& s : specs) {
    CAPTURE(s.h);
    CAPTURE(s.w);
    CAPTURE(s.groups);
    check_conv_pair<float>(s, seed);
    check_conv_pair<double>(s, seed + 40);
    seed += 7;
  }
}

TEST_CASE("gemm serial and omp variants agree bitwise for all transpose combinations") {
  const i64 m = 17, n = 13, k = 9;
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      CAPTURE(ta);
      CAPTURE(tb);
      auto a = random_buf<double>((size_t)(m * k), 1200 + ta);
      auto b = random_buf<double>((size_t)(k * n), 1300 + tb);
      std::vector<double> c_s((size_t)(m * n)), c_p((size_t)(m * n));
      gemm_serial(ta != 0, tb != 0, m, n, k, a.data(), b.data(), c_s.data());
      gemm_omp(ta != 0, tb != 0, m, n, k, a.data(), b.data(), c_p.data());
      CHECK(same_bits(c_s, c_p));

      auto af = random_buf<float>((size_t)(m * k), 1400 + ta);
      auto bf = random_buf<float>((size_t)(k * n), 1500 + tb);
      std::vector<float> cf_s((size_t)(m * n)), cf_p((size_t)(m * n));
      gemm_serial(ta != 0, tb != 0, m, n, k, af.data(), bf.data(), cf_s.data());
      gemm_omp(ta != 0, tb != 0, m, n, k, af.data(), bf.data(), cf_p.data());
      CHECK(same_bits(cf_s, cf_p));
    }
  }
}

TEST_CASE("fft2 serial and omp variants agree bitwise both directions") {
  for (auto [h, w] : {std::pair<i64, i64>{16, 8}, {8, 32}, {1, 16}, {4, 4}}) {
    CAPTURE(h);
    CAPTURE(w);
    auto x = random_buf<double>((size_t)(h * w * 2), 2100 + (u64)h);
    std::vector<double> y_s((size_t)(h * w * 2)), y_p((size_t)(h * w * 2));
    fft2_serial(x.data(), y_s.data(), h, w, false);
    fft2_omp(x.data(), y_p.data(), h, w, false);
    CHECK(same_bits(y_s, y_p));

    std::vector<double> z_s((size_t)(h * w * 2)), z_p((size_t)(h * w * 2));
    fft2_serial(y_s.data(), z_s.data(), h, w, true);
    fft2_omp(y_s.data(), z_p.data(), h, w, true);
    CHECK(same_bits(z_s, z_p));
  }
}

TEST_CASE("selective scan serial and omp variants agree bitwise") {
  for (bool exact : {false, true}) {
    CAPTURE(exact);
    ScanDims d;
    d.l = 64;
    d.c = 8;
    d.n = 4;
    d.exact_bbar = exact;
    const size_t lc = (size_t)(d.l * d.c);
    const size_t ln = (size_t)(d.l * d.n);
    const size_t cn = (size_t)(d.c * d.n);
    const size_t lcn = (size_t)(d.l * d.c * d.n);

    auto u = random_buf<double>(lc, 3000);
    auto delta = random_buf<double>(lc, 3001, 1e-3, 0.2);
    auto a = random_buf<double>(cn, 3002, -2.0, -0.1);
    auto b = random_buf<double>(ln, 3003);
    auto c_in = random_buf<double>(ln, 3004);
    auto skip = random_buf<double>((size_t)d.c, 3005);
    auto gy = random_buf<double>(lc, 3006);

    std::vector<double> y_s(lc), y_p(lc), h_s(lcn), h_p(lcn);
    selective_scan_forward_serial(d, u.data(), delta.data(), a.data(), b.data(), c_in.data(),
                                  skip.data(), y_s.data(), h_s.data());
    selective_scan_forward_omp(d, u.data(), delta.data(), a.data(), b.data(), c_in.data(),
                               skip.data(), y_p.data(), h_p.data());
    CHECK(same_bits(y_s, y_p));
    CHECK(same_bits(h_s, h_p));

    std::vector<double> gu_s(lc), gd_s(lc), ga_s(cn), gb_s(ln), gc_s(ln), gk_s((size_t)d.c);
    std::vector<double> gu_p(lc), gd_p(lc), ga_p(cn), gb_p(ln), gc_p(ln), gk_p((size_t)d.c);
    selective_scan_backward_serial(d, u.data(), delta.data(), a.data(), b.data(), c_in.data(),
                                   skip.data(), h_s.data(), gy.data(), gu_s.data(), gd_s.data(),
                                   ga_s.data(), gb_s.data(), gc_s.data(), gk_s.data());
    selective_scan_backward_omp(d, u.data(), delta.data(), a.data(), b.data(), c_in.data(),
                                skip.data(), h_s.data(), gy.data(), gu_p.data(), gd_p.data(),
                                ga_p.data(), gb_p.data(), gc_p.data(), gk_p.data());
    CHECK(same_bits(gu_s, gu_p));
    CHECK(same_bits(gd_s, gd_p));
    CHECK(same_bits(ga_s, ga_p));
    CHECK(same_bits(gb_s, gb_p));
    CHECK(same_bits(gc_s, gc_p));
    CHECK(same_bits(gk_s, gk_p));
  }
}

TEST_CASE("radon transform serial and omp variants agree bitwise") {
  const auto g = small_geom(32, 12);
  const size_t hw = (size_t)(g.h * g.w);
  const size_t sn = (size_t)(g.n_views * g.n_det);
  auto img = random_buf<double>(hw, 4000, 0.0, 1.0);
  auto sino_in = random_buf<double>(sn, 4001, 0.0, 1.0);

  std::vector<double> sino_s(sn), sino_p(sn);
  radon_forward_serial(g, img.data(), sino_s.data());
  radon_forward_omp(g, img.data(), sino_p.data());
  CHECK(same_bits(sino_s, sino_p));

  std::vector<double> bp_s(hw), bp_p(hw);
  radon_adjoint_serial(g, sino_in.data(), bp_s.data());
  radon_adjoint_omp(g, sino_in.data(), bp_p.data());
  CHECK(same_bits(bp_s, bp_p));

  for (bool hann : {false, true}) {
    CAPTURE(hann);
    std::vector<double> rec_s(hw), rec_p(hw);
    fbp_serial(g, sino_in.data(), rec_s.data(), hann);
    fbp_omp(g, sino_in.data(), rec_p.data(), hann);
    CHECK(same_bits(rec_s, rec_p));
  }

  std::vector<float> imgf(img.begin(), img.end());
  std::vector<float> sino_fs(sn), sino_fp(sn);
  radon_forward_serial(g, imgf.data(), sino_fs.data());
  radon_forward_omp(g, imgf.data(), sino_fp.data());
  CHECK(same_bits(sino_fs, sino_fp));
}

TEST_CASE("dispatch wrappers follow the serial toggle") {
  const i64 m = 6, n = 5, k = 4;
  auto a = random_buf<double>((size_t)(m * k), 5000);
  auto b = random_buf<double>((size_t)(k * n), 5001);
  std::vector<double> ref((size_t)(m * n)), got((size_t)(m * n));
  gemm_serial(false, false, m, n, k, a.data(), b.data(), ref.data());

  REQUIRE(par::omp_enabled());
  {
    par::SerialScope scope;
    CHECK_FALSE(par::omp_enabled());
    gemm(false, false, m, n, k, a.data(), b.data(), got.data());
    CHECK(same_bits(ref, got));
    {
      // Nested scopes restore the outer state, not the global default.
      par::SerialScope inner;
      CHECK_FALSE(par::omp_enabled());
    }
    CHECK_FALSE(par::omp_enabled());
  }
  CHECK(par::omp_enabled());

  std::fill(got.begin(), got.end(), 0.0);
  gemm(false, false, m, n, k, a.data(), b.data(), got.data());
  CHECK(same_bits(ref, got));
}

TEST_CASE("omp runtime reports at least one thread") {
  CHECK(par::max_threads() >= 1);
}
