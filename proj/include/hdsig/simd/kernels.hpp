#pragma once

// Data-parallel inner loops used by the feature extractors and models.
// Every kernel has a scalar reference implementation; wider variants are
// compiled in separate translation units and chosen at runtime from the
// CPU's feature flags. All variants agree with the scalar reference to
// rounding (see tests/test_simd.cpp).

#include <cstddef>
#include <string_view>

namespace hdsig::simd {

enum class Level { Scalar, Avx2 };

std::string_view level_name(Level level) noexcept;

struct AbsDiffStats {
  double sum = 0.0;  ///< sum of |x[i+1] - x[i]|
  double max = 0.0;  ///< max of |x[i+1] - x[i]| (0 for n < 2)
};

struct CentralSums {
  double s2 = 0.0;  ///< sum (x - mean)^2
  double s3 = 0.0;  ///< sum (x - mean)^3
  double s4 = 0.0;  ///< sum (x - mean)^4
};

struct KernelTable {
  Level level;

  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  CentralSums (*central_sums)(const double* x, std::size_t n, double mean);
  AbsDiffStats (*abs_diff_stats)(const double* x, std::size_t n);
  /// out[i] = (x[i+1] - x[i]) * scale, for i < n - 1
  void (*diff_scaled)(const double* x, std::size_t n, double scale, double* out);
  /// out[i] = |x[i+lag] - x[i]|, for i < n - lag
  void (*abs_lag_diff)(const double* x, std::size_t n, std::size_t lag, double* out);
  /// out[i] = (x[i] - offset) * w[i]
  void (*window_apply)(const double* x, const double* w, double offset, double* out,
                       std::size_t n);
  /// acc[i] += re[2i]^2 + re[2i+1]^2 over interleaved complex input
  void (*power_accumulate)(const double* interleaved, std::size_t n, double* acc);
  /// Strided correlation used by the single-level DWT. With `even`/`odd`
  /// the even- and odd-indexed samples of the periodically extended signal:
  ///   approx[k] = sum_i rlo[i] * ext[2k + i],  detail[k] = sum_i rhi[i] * ext[2k + i]
  void (*dwt_correlate)(const double* even, const double* odd, std::size_t n_out,
                        const double* rlo, const double* rhi, std::size_t taps,
                        double* approx, double* detail);
};

/// Table for the currently selected level.
const KernelTable& kernels() noexcept;

/// Table for an explicit level; falls back to scalar when unavailable.
const KernelTable& kernels_for(Level level) noexcept;

bool level_available(Level level) noexcept;

/// Best level supported by this CPU and build, unless overridden by the
/// HDSIG_SIMD environment variable ("scalar" or "avx2") or set_level().
Level active_level() noexcept;
void set_level(Level level) noexcept;

namespace scalar {
const KernelTable& table() noexcept;
}

#if defined(HDSIG_HAVE_AVX2)
namespace avx2 {
const KernelTable& table() noexcept;
}
#endif

}  // namespace hdsig::simd
