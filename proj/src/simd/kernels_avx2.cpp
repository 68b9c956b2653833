// AVX2 variants. This translation unit is compiled with -mavx2 -mfma and is
// only entered after the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "hdsig/simd/kernels.hpp"

namespace hdsig::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

inline __m256d vabs(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

double sum(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), a1);
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), a0);
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

CentralSums central_sums(const double* x, std::size_t n, double mean) {
  const __m256d vm = _mm256_set1_pd(mean);
  __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd(), s4 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
    const __m256d d2 = _mm256_mul_pd(d, d);
    s2 = _mm256_add_pd(s2, d2);
    s3 = _mm256_fmadd_pd(d2, d, s3);
    s4 = _mm256_fmadd_pd(d2, d2, s4);
  }
  CentralSums s{hsum(s2), hsum(s3), hsum(s4)};
  for (; i < n; ++i) {
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
  if (n < 2) return s;
  const std::size_t m = n - 1;  // number of differences
  __m256d vs = _mm256_setzero_pd(), vmx = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const __m256d d = vabs(_mm256_sub_pd(_mm256_loadu_pd(x + i + 1), _mm256_loadu_pd(x + i)));
    vs = _mm256_add_pd(vs, d);
    vmx = _mm256_max_pd(vmx, d);
  }
  s.sum = hsum(vs);
  s.max = hmax(vmx);
  for (; i < m; ++i) {
    const double d = std::abs(x[i + 1] - x[i]);
    s.sum += d;
    s.max = std::max(s.max, d);
  }
  return s;
}

void diff_scaled(const double* x, std::size_t n, double scale, double* out) {
  if (n < 2) return;
  const std::size_t m = n - 1;
  const __m256d vs = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i + 1),
                                                          _mm256_loadu_pd(x + i)),
                                            vs));
  for (; i < m; ++i) out[i] = (x[i + 1] - x[i]) * scale;
}

void abs_lag_diff(const double* x, std::size_t n, std::size_t lag, double* out) {
  if (lag >= n) return;
  const std::size_t m = n - lag;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4)
    _mm256_storeu_pd(out + i,
                     vabs(_mm256_sub_pd(_mm256_loadu_pd(x + i + lag), _mm256_loadu_pd(x + i))));
  for (; i < m; ++i) out[i] = std::abs(x[i + lag] - x[i]);
}

void window_apply(const double* x, const double* w, double offset, double* out, std::size_t n) {
  const __m256d vo = _mm256_set1_pd(offset);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), vo),
                                            _mm256_loadu_pd(w + i)));
  for (; i < n; ++i) out[i] = (x[i] - offset) * w[i];
}

void power_accumulate(const double* z, std::size_t n, double* acc) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // z holds re0 im0 re1 im1 | re2 im2 re3 im3
    const __m256d a = _mm256_loadu_pd(z + 2 * i);
    const __m256d b = _mm256_loadu_pd(z + 2 * i + 4);
    const __m256d a2 = _mm256_mul_pd(a, a);
    const __m256d b2 = _mm256_mul_pd(b, b);
    // hadd gives [a0+a1, b0+b1, a2+a3, b2+b3] = bins [0, 2, 1, 3]
    const __m256d h = _mm256_hadd_pd(a2, b2);
    const __m256d ordered = _mm256_permute4x64_pd(h, 0b11011000);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), ordered));
  }
  for (; i < n; ++i) acc[i] += z[2 * i] * z[2 * i] + z[2 * i + 1] * z[2 * i + 1];
}

void dwt_correlate(const double* even, const double* odd, std::size_t n_out, const double* rlo,
                   const double* rhi, std::size_t taps, double* approx, double* detail) {
  std::size_t k = 0;
  for (; k + 4 <= n_out; k += 4) {
    __m256d a = _mm256_setzero_pd(), d = _mm256_setzero_pd();
    for (std::size_t i = 0; i < taps; ++i) {
      const double* src = (i % 2 == 0) ? even : odd;
      const __m256d v = _mm256_loadu_pd(src + k + i / 2);
      a = _mm256_fmadd_pd(_mm256_set1_pd(rlo[i]), v, a);
      d = _mm256_fmadd_pd(_mm256_set1_pd(rhi[i]), v, d);
    }
    _mm256_storeu_pd(approx + k, a);
    _mm256_storeu_pd(detail + k, d);
  }
  for (; k < n_out; ++k) {
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
    Level::Avx2,  sum,          dot,          axpy,
    central_sums, abs_diff_stats, diff_scaled, abs_lag_diff,
    window_apply, power_accumulate, dwt_correlate,
};

}  // namespace

const KernelTable& table() noexcept { return kTable; }

}  // namespace hdsig::simd::avx2
