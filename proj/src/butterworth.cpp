#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "hdsig/error.hpp"
#include "hdsig/preprocess.hpp"

namespace hdsig {

using cd = std::complex<double>;

void BandPassSpec::validate(double fs) const {
  const double nyquist = fs / 2.0;
  if (!(low_cut_hz >= 0.0) || !(high_cut_hz > low_cut_hz) || !(high_cut_hz < nyquist)) {
    fail(ErrorCode::InvalidBand, "band [" + std::to_string(low_cut_hz) + ", " +
                                     std::to_string(high_cut_hz) + "] Hz is not inside (0, " +
                                     std::to_string(nyquist) + ") Hz");
  }
}

double SosFilter::magnitude(double freq_hz, double fs) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / fs;
  const cd z1 = std::polar(1.0, -w);
  const cd z2 = z1 * z1;
  cd h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

std::vector<double> SosFilter::apply(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : sections) {
    double z1 = 0.0, z2 = 0.0;
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

SosFilter design_butterworth_bandpass(std::size_t order, const BandPassSpec& band, double fs) {
  band.validate(fs);
  if (order == 0 || order % 2 != 0)
    fail(ErrorCode::InvalidArgument, "Butterworth prototype order must be even and positive");
  const double pi = std::numbers::pi;
  const double n = static_cast<double>(order);

  if (band.low_cut_hz == 0.0) {
    // Degenerate band [0, high]: plain low-pass, unit gain at DC.
    const double wc = 2.0 * fs * std::tan(pi * band.high_cut_hz / fs);
    SosFilter f;
    for (std::size_t k = 0; k < order / 2; ++k) {
      const cd s = wc * std::polar(1.0, pi * (2.0 * static_cast<double>(k) + n + 1.0) / (2.0 * n));
      const cd z = (2.0 * fs + s) / (2.0 * fs - s);
      f.sections.push_back({1.0, 2.0, 1.0, -2.0 * z.real(), std::norm(z)});
    }
    const double gain = 1.0 / f.magnitude(0.0, fs);
    for (auto* c : {&f.sections.front().b0, &f.sections.front().b1, &f.sections.front().b2}) *c *= gain;
    return f;
  }

  const double w1 = 2.0 * fs * std::tan(pi * band.low_cut_hz / fs);
  const double w2 = 2.0 * fs * std::tan(pi * band.high_cut_hz / fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  // Upper-half-plane poles of the band-pass; each becomes one biquad with its
  // conjugate. Prototype poles p_k = exp(i*pi*(2k + N + 1) / (2N)).
  std::vector<cd> upper;
  for (std::size_t k = 0; k < order; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * static_cast<double>(k) + n + 1.0) / (2.0 * n));
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0sq);
    for (cd s : {half + root, half - root}) {
      const cd z = (2.0 * fs + s) / (2.0 * fs - s);
      if (z.imag() > 0.0) upper.push_back(z);
    }
  }
  if (upper.size() != order)
    fail(ErrorCode::InvalidBand, "band too narrow or too wide for a stable band-pass design");
  std::sort(upper.begin(), upper.end(),
            [](const cd& a, const cd& b) { return std::abs(a) < std::abs(b); });

  SosFilter f;
  for (const cd& z : upper) f.sections.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});

  const double center = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs)) * fs / (2.0 * pi);
  const double gain = 1.0 / f.magnitude(center, fs);
  f.sections.front().b0 *= gain;
  f.sections.front().b1 *= gain;
  f.sections.front().b2 *= gain;
  return f;
}

namespace {

void sos_pass(const SosFilter& f, std::vector<double>& y, double x0) {
  // Steady-state initial conditions for a constant input x0.
  double scale = x0;
  for (const auto& s : f.sections) {
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z1 = scale * (dc - s.b0);
    double z2 = scale * (s.b2 - s.a2 * dc);
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    scale *= dc;
  }
}

}  // namespace

std::vector<double> filtfilt(const SosFilter& f, std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  if (n == 0) fail(ErrorCode::EmptySignal, "cannot filter an empty signal");
  pad = std::min(pad, n - 1);

  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  sos_pass(f, ext, ext.front());
  std::reverse(ext.begin(), ext.end());
  sos_pass(f, ext, ext.front());
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Recording bandpass_filter(const Recording& rec, const BandPassSpec& spec, std::size_t order) {
  if (rec.length() == 0) fail(ErrorCode::EmptySignal, "recording has no samples");
  const SosFilter f = design_butterworth_bandpass(order, spec, rec.modality.sampling_rate_hz);
  const std::size_t pad = 3 * f.order();
  Recording out = rec;
  for (std::size_t c = 0; c < rec.channels(); ++c) {
    auto y = filtfilt(f, rec.samples.row(c), pad);
    std::copy(y.begin(), y.end(), out.samples.row(c).begin());
  }
  return out;
}

}  // namespace hdsig
