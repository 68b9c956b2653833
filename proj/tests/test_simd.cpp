#include <cmath>
#include <vector>

#include "doctest.h"

#include "hdsig/rng.hpp"
#include "hdsig/simd/kernels.hpp"

using namespace hdsig;
namespace sk = hdsig::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

void check_close(double a, double b, double rel) {
  CHECK(std::abs(a - b) <= rel * (1.0 + std::abs(a) + std::abs(b)));
}

}  // namespace

TEST_CASE("scalar kernels on small inputs") {
  const auto& k = sk::kernels_for(sk::Level::Scalar);
  const double x[] = {1, 3, 2, 6};
  CHECK(k.sum(x, 4) == 12.0);
  CHECK(k.dot(x, x, 4) == 50.0);
  const auto ad = k.abs_diff_stats(x, 4);
  CHECK(ad.sum == 7.0);
  CHECK(ad.max == 4.0);
  CHECK(k.abs_diff_stats(x, 1).max == 0.0);
  const auto cs = k.central_sums(x, 4, 3.0);
  CHECK(cs.s2 == 14.0);
  CHECK(cs.s3 == 18.0);
  CHECK(cs.s4 == 98.0);
  double d[3];
  k.diff_scaled(x, 4, 10.0, d);
  CHECK(d[0] == 20.0);
  CHECK(d[1] == -10.0);
  CHECK(d[2] == 40.0);
}

TEST_CASE("avx2 kernels match the scalar reference") {
  if (!sk::level_available(sk::Level::Avx2)) {
    MESSAGE("AVX2 not available; equivalence not exercised");
    return;
  }
  const auto& s = sk::kernels_for(sk::Level::Scalar);
  const auto& v = sk::kernels_for(sk::Level::Avx2);
  REQUIRE(v.level == sk::Level::Avx2);

  // lengths straddle the 4-wide and 16-wide unroll boundaries
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 257u, 1000u, 5001u}) {
    CAPTURE(n);
    const auto a = random_vec(n, 11 + n, 3.0);
    const auto b = random_vec(n, 97 + n);
    check_close(s.sum(a.data(), n), v.sum(a.data(), n), 1e-12);
    check_close(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n), 1e-12);

    auto y1 = b, y2 = b;
    s.axpy(0.37, a.data(), y1.data(), n);
    v.axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) check_close(y1[i], y2[i], 1e-15);

    const auto c1 = s.central_sums(a.data(), n, 0.2);
    const auto c2 = v.central_sums(a.data(), n, 0.2);
    check_close(c1.s2, c2.s2, 1e-12);
    check_close(c1.s3, c2.s3, 1e-12);
    check_close(c1.s4, c2.s4, 1e-12);

    const auto d1 = s.abs_diff_stats(a.data(), n);
    const auto d2 = v.abs_diff_stats(a.data(), n);
    check_close(d1.sum, d2.sum, 1e-12);
    CHECK(d1.max == d2.max);

    if (n >= 2) {
      std::vector<double> o1(n - 1), o2(n - 1);
      s.diff_scaled(a.data(), n, 250.0, o1.data());
      v.diff_scaled(a.data(), n, 250.0, o2.data());
      CHECK(o1 == o2);
    }
    for (std::size_t lag : {1u, 3u, 10u}) {
      if (n <= lag) continue;
      std::vector<double> o1(n - lag), o2(n - lag);
      s.abs_lag_diff(a.data(), n, lag, o1.data());
      v.abs_lag_diff(a.data(), n, lag, o2.data());
      CHECK(o1 == o2);
    }

    std::vector<double> w1(n), w2(n);
    s.window_apply(a.data(), b.data(), 0.5, w1.data(), n);
    v.window_apply(a.data(), b.data(), 0.5, w2.data(), n);
    CHECK(w1 == w2);

    const auto z = random_vec(2 * n, 5 + n);
    std::vector<double> p1(n, 1.0), p2(n, 1.0);
    s.power_accumulate(z.data(), n, p1.data());
    v.power_accumulate(z.data(), n, p2.data());
    for (std::size_t i = 0; i < n; ++i) check_close(p1[i], p2[i], 1e-15);
  }
}

TEST_CASE("avx2 dwt correlation matches scalar") {
  if (!sk::level_available(sk::Level::Avx2)) return;
  const auto& s = sk::kernels_for(sk::Level::Scalar);
  const auto& v = sk::kernels_for(sk::Level::Avx2);
  for (std::size_t taps : {6u, 8u}) {
    for (std::size_t n_out : {1u, 3u, 4u, 9u, 250u, 2501u}) {
      CAPTURE(taps);
      CAPTURE(n_out);
      const std::size_t half = n_out + taps / 2;
      const auto even = random_vec(half, 3 * n_out + taps);
      const auto odd = random_vec(half, 7 * n_out + taps);
      const auto lo = random_vec(taps, 1);
      const auto hi = random_vec(taps, 2);
      std::vector<double> a1(n_out), d1(n_out), a2(n_out), d2(n_out);
      s.dwt_correlate(even.data(), odd.data(), n_out, lo.data(), hi.data(), taps, a1.data(), d1.data());
      v.dwt_correlate(even.data(), odd.data(), n_out, lo.data(), hi.data(), taps, a2.data(), d2.data());
      for (std::size_t i = 0; i < n_out; ++i) {
        check_close(a1[i], a2[i], 1e-14);
        check_close(d1[i], d2[i], 1e-14);
      }
    }
  }
}

TEST_CASE("level selection") {
  CHECK(sk::level_available(sk::Level::Scalar));
  const auto before = sk::active_level();
  sk::set_level(sk::Level::Scalar);
  CHECK(sk::kernels().level == sk::Level::Scalar);
  sk::set_level(before);
  CHECK(sk::kernels().level == before);
  CHECK(sk::level_name(sk::Level::Avx2) == "avx2");
}
