#include <algorithm>

#include "hdsig/error.hpp"
#include "hdsig/features.hpp"
#include "hdsig/simd/kernels.hpp"

namespace hdsig {

std::string_view wavelet_name(Wavelet w) noexcept {
  return w == Wavelet::Coif1 ? "coif1" : "db4";
}

Wavelet parse_wavelet(std::string_view name) {
  if (name == "coif1") return Wavelet::Coif1;
  if (name == "db4") return Wavelet::Db4;
  fail(ErrorCode::InvalidArgument, "unsupported wavelet '" + std::string(name) + "'");
}

const FilterBank& filter_bank(Wavelet w) {
  // Decomposition filters in the usual (PyWavelets) orientation.
  static const FilterBank coif1{
      {-0.015655728135791993, -0.07273261951252645, 0.3848648468648578, 0.8525720202116004,
       0.3378976624574818, -0.07273261951252645},
      {0.07273261951252645, 0.3378976624574818, -0.8525720202116004, 0.3848648468648578,
       0.07273261951252645, -0.015655728135791993}};
  static const FilterBank db4{
      {-0.010597401785069032, 0.0328830116668852, 0.030841381835560764, -0.18703481171909309,
       -0.027983769416859854, 0.6308807679298589, 0.7148465705529157, 0.2303778133088965},
      {-0.2303778133088965, 0.7148465705529157, -0.6308807679298589, -0.027983769416859854,
       0.18703481171909309, 0.030841381835560764, -0.0328830116668852, -0.010597401785069032}};
  return w == Wavelet::Coif1 ? coif1 : db4;
}

WaveletCoeffs dwt_level1(std::span<const double> y, Wavelet wavelet) {
  const FilterBank& fb = filter_bank(wavelet);
  const std::size_t taps = fb.dec_lo.size();
  if (y.size() < taps)
    fail(ErrorCode::SignalTooShort, "signal shorter than the " + std::string(wavelet_name(wavelet)) + " filter");

  const std::size_t n = y.size() + (y.size() % 2);  // odd lengths repeat the last sample
  const std::size_t n_out = n / 2;
  auto at = [&](std::size_t i) { return i < y.size() ? y[i] : y.back(); };

  // approx[k] = sum_j lo[j] * x[(2k + taps/2 - j) mod n]
  //           = sum_i lo[taps-1-i] * ext[2k + i],  ext[t] = x[(t - taps/2 + 1) mod n]
  const std::size_t half = taps / 2;
  const std::size_t ext_half = n_out + half + 1;
  std::vector<double> even(ext_half), odd(ext_half);
  for (std::size_t m = 0; m < ext_half; ++m) {
    for (std::size_t parity = 0; parity < 2; ++parity) {
      const std::size_t t = 2 * m + parity;
      const std::size_t src = (t + n - (half - 1) % n) % n;
      (parity == 0 ? even : odd)[m] = at(src);
    }
  }
  std::vector<double> rlo(fb.dec_lo.rbegin(), fb.dec_lo.rend());
  std::vector<double> rhi(fb.dec_hi.rbegin(), fb.dec_hi.rend());

  WaveletCoeffs c;
  c.wavelet_name = std::string(wavelet_name(wavelet));
  c.approx.resize(n_out);
  c.detail.resize(n_out);
  simd::kernels().dwt_correlate(even.data(), odd.data(), n_out, rlo.data(), rhi.data(), taps,
                                c.approx.data(), c.detail.data());
  return c;
}

}  // namespace hdsig
