#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hdsig/error.hpp"
#include "hdsig/features.hpp"
#include "hdsig/simd/kernels.hpp"

namespace hdsig {

namespace {

double max_abs(std::span<const double> y) {
  double m = 0.0;
  for (double v : y) m = std::max(m, std::abs(v));
  return m;
}

// Variance below rounding noise of the data's magnitude counts as zero.
bool negligible_variance(double var, std::span<const double> y) {
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * max_abs(y);
  return !(var > floor * floor);
}

double population_variance(std::span<const double> y) {
  const auto& k = simd::kernels();
  const double n = static_cast<double>(y.size());
  const double mean = k.sum(y.data(), y.size()) / n;
  return k.central_sums(y.data(), y.size(), mean).s2 / n;
}

std::vector<double> scaled_diff(std::span<const double> y, double scale) {
  std::vector<double> d(y.size() > 0 ? y.size() - 1 : 0);
  simd::kernels().diff_scaled(y.data(), y.size(), scale, d.data());
  return d;
}

}  // namespace

HjorthParams hjorth(std::span<const double> y, double fs) {
  if (y.size() < 3) fail(ErrorCode::SignalTooShort, "Hjorth parameters need at least 3 samples");
  const auto dy = scaled_diff(y, fs);
  const auto ddy = scaled_diff(dy, fs);
  const double var_y = population_variance(y);
  const double var_dy = population_variance(dy);
  const double var_ddy = population_variance(ddy);
  if (negligible_variance(var_y, y)) fail(ErrorCode::ZeroVariance, "constant signal has no Hjorth mobility");
  if (negligible_variance(var_dy, dy)) fail(ErrorCode::ZeroVariance, "signal derivative is constant");

  HjorthParams h;
  h.activity = var_y;
  h.mobility = std::sqrt(var_dy / var_y);
  h.complexity = std::sqrt(var_ddy / var_dy) / h.mobility;
  return h;
}

StatisticalFeatures statistical_features(std::span<const double> y, double level_offset) {
  if (y.size() < 3) fail(ErrorCode::SignalTooShort, "statistical features need at least 3 samples");
  const auto& k = simd::kernels();
  const double n = static_cast<double>(y.size());
  const double mean = k.sum(y.data(), y.size()) / n;
  const auto cs = k.central_sums(y.data(), y.size(), mean);
  const double m2 = cs.s2 / n;
  if (negligible_variance(m2, y)) fail(ErrorCode::ZeroVariance, "constant signal has no shape moments");
  const double level = mean + level_offset;
  if (level == 0.0) fail(ErrorCode::ZeroMean, "coefficient of variation undefined for zero mean");

  StatisticalFeatures f;
  f.kurtosis = (cs.s4 / n) / (m2 * m2) - 3.0;
  f.skewness = (cs.s3 / n) / std::pow(m2, 1.5);
  f.coef_of_variation = std::sqrt(m2) / std::abs(level);

  const auto d1 = k.abs_diff_stats(y.data(), y.size());
  f.diff1_mean = d1.sum / (n - 1.0);
  f.diff1_max = d1.max;
  const auto dy = scaled_diff(y, 1.0);
  const auto d2 = k.abs_diff_stats(dy.data(), dy.size());
  f.diff2_mean = d2.sum / (n - 2.0);
  f.diff2_max = d2.max;
  return f;
}

SlopeFeatures slope_features(std::span<const double> y, double fs) {
  if (y.size() < 2) fail(ErrorCode::SignalTooShort, "slope features need at least 2 samples");
  const auto& k = simd::kernels();
  const auto s = scaled_diff(y, fs);
  const double n = static_cast<double>(s.size());
  SlopeFeatures out;
  out.mean = k.sum(s.data(), s.size()) / n;
  out.variance = k.central_sums(s.data(), s.size(), out.mean).s2 / n;
  return out;
}

double higuchi_fd(std::span<const double> y, std::size_t k_max) {
  if (k_max < 2) fail(ErrorCode::InvalidArgument, "Higuchi k_max must be at least 2");
  const std::size_t n = y.size();
  if (n < 2 * k_max)
    fail(ErrorCode::SignalTooShort, "Higuchi FD needs at least 2 * k_max samples");

  const auto& kern = simd::kernels();
  std::vector<double> lagged(n);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    kern.abs_lag_diff(y.data(), n, k, lagged.data());
    double total = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
      const std::size_t steps = (n - 1 - m) / k;
      double len = 0.0;
      for (std::size_t j = 0; j < steps; ++j) len += lagged[m + j * k];
      const double kk = static_cast<double>(k);
      total += len * static_cast<double>(n - 1) / (static_cast<double>(steps) * kk) / kk;
    }
    const double curve = total / static_cast<double>(k);
    if (!(curve > 0.0))
      fail(ErrorCode::DegenerateLengths, "zero Higuchi curve length at k = " + std::to_string(k));
    const double lx = std::log(static_cast<double>(k));
    const double ly = std::log(curve);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(k_max);
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return -slope;
}

WaveletFeatures wavelet_features(const WaveletCoeffs& c) {
  if (c.approx.empty() || c.detail.empty())
    fail(ErrorCode::InvalidArgument, "wavelet features need non-empty coefficient sequences");
  auto summarize = [](const std::vector<double>& v, double& mean, double& sd, double& energy,
                      double& entropy) {
    const auto& k = simd::kernels();
    const double n = static_cast<double>(v.size());
    mean = k.sum(v.data(), v.size()) / n;
    sd = std::sqrt(k.central_sums(v.data(), v.size(), mean).s2 / n);
    energy = k.dot(v.data(), v.data(), v.size());
    entropy = 0.0;
    for (double x : v) {
      const double e = x * x;
      if (e > 0.0) entropy += e * std::log(e);
    }
  };
  WaveletFeatures f;
  summarize(c.approx, f.approx_mean, f.approx_sd, f.approx_energy, f.approx_entropy);
  summarize(c.detail, f.detail_mean, f.detail_sd, f.detail_energy, f.detail_entropy);
  return f;
}

}  // namespace hdsig
