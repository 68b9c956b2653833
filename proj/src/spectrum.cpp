#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "hdsig/error.hpp"
#include "hdsig/features.hpp"
#include "hdsig/simd/kernels.hpp"

namespace hdsig {

namespace {

// FFTW's planner is not thread-safe; plan execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Per-thread real-to-complex plan and aligned buffers for one length.
class R2CPlan {
 public:
  explicit R2CPlan(std::size_t n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    std::lock_guard lock(planner_mutex());
    // ESTIMATE keeps the chosen algorithm, and therefore the rounding,
    // identical from run to run.
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~R2CPlan() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  R2CPlan(const R2CPlan&) = delete;
  R2CPlan& operator=(const R2CPlan&) = delete;

  double* input() noexcept { return in_; }
  const double* output() const noexcept { return reinterpret_cast<const double*>(out_); }
  void execute() noexcept { fftw_execute(plan_); }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

R2CPlan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<R2CPlan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<R2CPlan>(n);
  return *slot;
}

const std::vector<double>& hann_periodic(std::size_t n) {
  thread_local std::map<std::size_t, std::vector<double>> cache;
  auto& w = cache[n];
  if (w.empty()) {
    w.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

}  // namespace

Spectrum welch_psd(std::span<const double> y, double fs, const WelchConfig& cfg) {
  const std::size_t m = cfg.segment_len_samples;
  if (m == 0) fail(ErrorCode::InvalidArgument, "Welch segment length must be positive");
  if (!(cfg.overlap_fraction >= 0.0 && cfg.overlap_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "Welch overlap must be in [0, 1)");
  if (y.size() < m)
    fail(ErrorCode::SegmentTooLong, "Welch segment of " + std::to_string(m) +
                                        " samples exceeds signal length " + std::to_string(y.size()));

  const auto noverlap = static_cast<std::size_t>(std::floor(static_cast<double>(m) * cfg.overlap_fraction));
  const std::size_t step = m - noverlap;
  const std::size_t segments = (y.size() - m) / step + 1;

  const auto& w = hann_periodic(m);
  double wss = 0.0;
  for (double v : w) wss += v * v;

  R2CPlan& plan = plan_for(m);
  const auto& k = simd::kernels();
  std::vector<double> acc(plan.bins(), 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    const double* seg = y.data() + s * step;
    const double mean = k.sum(seg, m) / static_cast<double>(m);
    k.window_apply(seg, w.data(), mean, plan.input(), m);
    plan.execute();
    k.power_accumulate(plan.output(), plan.bins(), acc.data());
  }

  Spectrum sp;
  sp.resolution_hz = fs / static_cast<double>(m);
  sp.freqs_hz.resize(acc.size());
  sp.power.resize(acc.size());
  const double scale = 1.0 / (fs * wss * static_cast<double>(segments));
  const std::size_t last = acc.size() - 1;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    sp.freqs_hz[i] = static_cast<double>(i) * sp.resolution_hz;
    const bool unpaired = (i == 0) || (m % 2 == 0 && i == last);
    sp.power[i] = acc[i] * scale * (unpaired ? 1.0 : 2.0);
  }
  return sp;
}

double band_power(const Spectrum& s, const Band& band) {
  if (s.freqs_hz.size() < 2 || s.freqs_hz.size() != s.power.size())
    fail(ErrorCode::InvalidArgument, "spectrum needs at least two bins");
  const double tol = 1e-9 * s.resolution_hz;
  if (!(band.low_hz < band.high_hz) || band.low_hz < s.freqs_hz.front() - tol ||
      band.high_hz > s.freqs_hz.back() + tol) {
    fail(ErrorCode::BandOutOfRange, "band '" + band.name + "' [" + std::to_string(band.low_hz) + ", " +
                                        std::to_string(band.high_hz) + "] Hz outside spectrum [" +
                                        std::to_string(s.freqs_hz.front()) + ", " +
                                        std::to_string(s.freqs_hz.back()) + "] Hz");
  }
  const double lo = std::max(band.low_hz, s.freqs_hz.front());
  const double hi = std::min(band.high_hz, s.freqs_hz.back());
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < s.freqs_hz.size(); ++i) {
    const double f0 = s.freqs_hz[i], f1 = s.freqs_hz[i + 1];
    const double a = std::max(lo, f0), b = std::min(hi, f1);
    if (b <= a) continue;
    const double slope = (s.power[i + 1] - s.power[i]) / (f1 - f0);
    const double pa = s.power[i] + slope * (a - f0);
    const double pb = s.power[i] + slope * (b - f0);
    area += 0.5 * (pa + pb) * (b - a);
  }
  return std::max(area, 0.0);
}

}  // namespace hdsig
