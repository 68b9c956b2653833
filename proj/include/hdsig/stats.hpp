#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hdsig/features.hpp"
#include "hdsig/matrix.hpp"

namespace hdsig {

// ---------------------------------------------------------------------------
// Distribution functions

/// Regularized incomplete beta I_x(a, b), continued fraction (Lentz).
double incomplete_beta(double a, double b, double x);

double students_t_cdf(double t, double df);
/// P(|T| >= |t|), computed without cancellation so tiny p-values survive.
double students_t_two_sided(double t, double df);
/// P(F >= f) for F(d1, d2).
double f_survival(double f, double d1, double d2);

// ---------------------------------------------------------------------------
// Ordinary least squares

struct OlsResult {
  std::vector<double> coef, se, t, p;  ///< one per column of X
  bool has_intercept = true;
  double intercept = 0.0, intercept_se = 0.0, intercept_t = 0.0, intercept_p = 0.0;
  std::vector<double> residuals;
  double r_squared = 0.0;
  double f_statistic = 0.0;
  double prob_f = 0.0;
  double log_likelihood = 0.0;
  double sigma2 = 0.0;  ///< SSE / (n - p - 1)
  std::size_t n = 0;           ///< rows
  std::size_t n_features = 0;  ///< regressors, excluding the intercept
  bool degenerate = false;  ///< residual variance ~ 0; t and p are NaN
};

/// QR with column pivoting on the standardized design; coefficients and
/// standard errors are mapped back to raw units. Throws RankDeficient
/// naming the dependent columns, or TooFewRows when n <= p + 1.
OlsResult ols_fit(const Matrix& X, std::span<const double> y, bool add_intercept = true);

/// Columns the pivoted QR finds linearly dependent on the others (after
/// standardization, relative threshold 1e-9). Empty for full-rank designs.
std::vector<std::size_t> rank_deficient_columns(const Matrix& X, bool add_intercept = true);

// ---------------------------------------------------------------------------
// Summaries

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  ///< sample SD; 0 for fewer than two values
};

MeanSd mean_sd(std::span<const double> v);

inline constexpr double kDefaultPThresholdsArr[] = {0.0, 0.001, 0.01, 0.05};
inline constexpr std::span<const double> kDefaultPThresholds{kDefaultPThresholdsArr};

struct PValueBucket {
  std::string label;
  double lo = 0.0, hi = 0.0;  ///< lo <= p < hi (last bucket includes 1)
  std::size_t count = 0;
  MeanSd p, t, se;
};

/// thresholds = {0, a, b, ...}: a "p = 0" bucket (p < 1e-300), then
/// [1e-300, a), [a, b), ..., [last, 1]. NaN p-values go to a trailing
/// "undefined" bucket that only appears when needed.
std::vector<PValueBucket> p_value_buckets(const OlsResult& r,
                                          std::span<const double> thresholds = kDefaultPThresholds);

enum class ImportanceBasis { FeatureFamily, Signal, EegChannel, EegPsdBand };

std::string_view basis_key(ImportanceBasis b) noexcept;  ///< family, signal, eeg_channel, eeg_psd_band
inline constexpr ImportanceBasis kAllBases[] = {ImportanceBasis::FeatureFamily, ImportanceBasis::Signal,
                                                ImportanceBasis::EegChannel, ImportanceBasis::EegPsdBand};

struct ImportanceGroup {
  std::string key;
  double mean = 0.0;
  double se = 0.0;  ///< SD / sqrt(count)
  std::size_t count = 0;
};

struct ImportanceGroupReport {
  ImportanceBasis basis = ImportanceBasis::FeatureFamily;
  std::vector<ImportanceGroup> groups;  ///< by mean, descending
};

/// EegChannel and EegPsdBand only consider EEG columns (PSD columns for the
/// latter); the other bases partition every column.
ImportanceGroupReport grouped_importance(std::span<const double> importances,
                                         std::span<const FeatureDescriptor> descriptors,
                                         ImportanceBasis basis);

/// `indices` labels each coefficient row (defaults to 0..p-1).
std::string significance_csv(const OlsResult& r, std::span<const std::string> names,
                             std::span<const std::size_t> indices = {});
std::string buckets_csv(const std::vector<PValueBucket>& buckets);
std::string importance_csv(const ImportanceGroupReport& rep);

}  // namespace hdsig
