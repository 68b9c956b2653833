#include <algorithm>
#include <cmath>

#include "hdsig/simd/kernels.hpp"

namespace hdsig::simd::scalar {

namespace {

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

CentralSums central_sums(const double* x, std::size_t n, double mean) {
  CentralSums s;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    const double d2 = d * d;
    s.s2 += d2;
    s.s3 += d2 * d;
    s.s4 += d2 * d2;
  }
  return s;
}

AbsDiffStats abs_diff_stats(const double* x, std::size_t n) {
  AbsDiffStats s;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = std::abs(x[i] - x[i - 1]);
    s.sum += d;
    s.max = std::max(s.max, d);
  }
  return s;
}

void diff_scaled(const double* x, std::size_t n, double scale, double* out) {
  for (std::size_t i = 1; i < n; ++i) out[i - 1] = (x[i] - x[i - 1]) * scale;
}

void abs_lag_diff(const double* x, std::size_t n, std::size_t lag, double* out) {
  for (std::size_t i = 0; i + lag < n; ++i) out[i] = std::abs(x[i + lag] - x[i]);
}

void window_apply(const double* x, const double* w, double offset, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - offset) * w[i];
}

void power_accumulate(const double* z, std::size_t n, double* acc) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += z[2 * i] * z[2 * i] + z[2 * i + 1] * z[2 * i + 1];
}

void dwt_correlate(const double* even, const double* odd, std::size_t n_out, const double* rlo,
                   const double* rhi, std::size_t taps, double* approx, double* detail) {
  for (std::size_t k = 0; k < n_out; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t i = 0; i < taps; ++i) {
      const double v = (i % 2 == 0) ? even[k + i / 2] : odd[k + i / 2];
      a += rlo[i] * v;
      d += rhi[i] * v;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

constexpr KernelTable kTable{
    Level::Scalar, sum,          dot,          axpy,
    central_sums,  abs_diff_stats, diff_scaled, abs_lag_diff,
    window_apply,  power_accumulate, dwt_correlate,
};

}  // namespace

const KernelTable& table() noexcept { return kTable; }

}  // namespace hdsig::simd::scalar
