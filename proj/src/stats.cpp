#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>

#include "hdsig/error.hpp"
#include "hdsig/stats.hpp"

namespace hdsig {

namespace {

constexpr double kRankTolerance = 1e-9;
constexpr double kPZero = 1e-300;

struct Design {
  Eigen::MatrixXd Z;  // column-major, standardized
  std::vector<double> center, scale;
  std::vector<std::size_t> constant;  // zero-spread columns
};

Design standardize_design(const Matrix& X, bool add_intercept) {
  const auto n = static_cast<Eigen::Index>(X.rows());
  const auto p = static_cast<Eigen::Index>(X.cols());
  Design d;
  d.Z.resize(n, p);
  d.center.assign(X.cols(), 0.0);
  d.scale.assign(X.cols(), 1.0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += X(static_cast<std::size_t>(i), jj);
    const double mean = add_intercept ? sum / static_cast<double>(n) : 0.0;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = X(static_cast<std::size_t>(i), jj) - mean;
      ss += v * v;
    }
    const double s = std::sqrt(ss / static_cast<double>(n));
    d.center[jj] = mean;
    if (s > 0.0) d.scale[jj] = s;
    else d.constant.push_back(jj);
    for (Eigen::Index i = 0; i < n; ++i) d.Z(i, j) = (X(static_cast<std::size_t>(i), jj) - mean) / d.scale[jj];
  }
  return d;
}

void check_ols_inputs(const Matrix& X, std::size_t y_size, bool add_intercept) {
  if (X.rows() != y_size)
    fail(ErrorCode::LengthMismatch, "X has " + std::to_string(X.rows()) + " rows, y has " + std::to_string(y_size));
  if (X.cols() == 0) fail(ErrorCode::InvalidArgument, "OLS needs at least one regressor");
  if (X.rows() <= X.cols() + (add_intercept ? 1 : 0))
    fail(ErrorCode::TooFewRows, "OLS needs more rows (" + std::to_string(X.rows()) + ") than parameters");
  if (!X.all_finite()) fail(ErrorCode::NonFiniteInput, "design matrix has non-finite entries");
}

std::vector<std::size_t> dependent_columns(const Design& d, const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
  std::vector<std::size_t> out(d.constant.begin(), d.constant.end());
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) out.push_back(static_cast<std::size_t>(perm[k]));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string join_indices(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::vector<std::size_t> rank_deficient_columns(const Matrix& X, bool add_intercept) {
  if (X.cols() == 0 || X.rows() == 0) return {};
  const Design d = standardize_design(X, add_intercept);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.Z.rows(), d.Z.cols());
  qr.setThreshold(kRankTolerance);
  qr.compute(d.Z);
  return dependent_columns(d, qr);
}

OlsResult ols_fit(const Matrix& X, std::span<const double> y, bool add_intercept) {
  check_ols_inputs(X, y.size(), add_intercept);
  for (double v : y)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "response has non-finite entries");

  const std::size_t n = X.rows(), p = X.cols();
  const Design d = standardize_design(X, add_intercept);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.Z.rows(), d.Z.cols());
  qr.setThreshold(kRankTolerance);
  qr.compute(d.Z);
  if (const auto dep = dependent_columns(d, qr); !dep.empty()) {
    fail(ErrorCode::RankDeficient, "design is rank deficient; dependent columns: " + join_indices(dep));
  }

  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= static_cast<double>(n);
  Eigen::VectorXd yc(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) yc[static_cast<Eigen::Index>(i)] = y[i] - (add_intercept ? y_mean : 0.0);

  const Eigen::VectorXd beta = qr.solve(yc);
  const Eigen::VectorXd resid = yc - d.Z * beta;
  const double sse = resid.squaredNorm();
  const double sst = yc.squaredNorm();
  if (!(sst > 0.0)) fail(ErrorCode::InvalidArgument, "response has no variation to explain");
  const std::size_t k = p + (add_intercept ? 1 : 0);
  const double df = static_cast<double>(n - k);

  OlsResult r;
  r.n = n;
  r.n_features = p;
  r.has_intercept = add_intercept;
  r.residuals.assign(resid.data(), resid.data() + resid.size());
  r.r_squared = 1.0 - sse / sst;
  r.sigma2 = sse / df;
  r.degenerate = sse <= 1e-24 * sst;
  const double sigma2_ml = sse / static_cast<double>(n);
  r.log_likelihood = sigma2_ml > 0.0
                         ? -0.5 * static_cast<double>(n) * (std::log(2.0 * std::numbers::pi * sigma2_ml) + 1.0)
                         : std::numeric_limits<double>::infinity();

  // (Z'Z)^-1 = P R^-1 R^-T P'
  const auto pp = static_cast<Eigen::Index>(p);
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(pp, pp).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(pp, pp));
  const Eigen::MatrixXd Ginv_perm = Rinv * Rinv.transpose();
  const auto& perm = qr.colsPermutation().indices();
  Eigen::MatrixXd cov(pp, pp);  // covariance of raw coefficients / sigma2
  for (Eigen::Index a = 0; a < pp; ++a)
    for (Eigen::Index b = 0; b < pp; ++b) {
      const auto ja = static_cast<std::size_t>(perm[a]), jb = static_cast<std::size_t>(perm[b]);
      cov(perm[a], perm[b]) = Ginv_perm(a, b) / (d.scale[ja] * d.scale[jb]);
    }

  r.coef.resize(p);
  r.se.resize(p);
  r.t.resize(p);
  r.p.resize(p);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t j = 0; j < p; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    r.coef[j] = beta[jj] / d.scale[j];
    r.se[j] = std::sqrt(r.sigma2 * cov(jj, jj));
    r.t[j] = r.degenerate ? nan : r.coef[j] / r.se[j];
    r.p[j] = r.degenerate ? nan : students_t_two_sided(r.t[j], df);
  }
  if (add_intercept) {
    Eigen::VectorXd c(pp);
    for (std::size_t j = 0; j < p; ++j) c[static_cast<Eigen::Index>(j)] = d.center[j];
    r.intercept = y_mean;
    for (std::size_t j = 0; j < p; ++j) r.intercept -= r.coef[j] * d.center[j];
    // Centered regressors make the mean of y uncorrelated with the slopes.
    r.intercept_se = std::sqrt(r.sigma2 / static_cast<double>(n) + r.sigma2 * c.dot(cov * c));
    r.intercept_t = r.degenerate ? nan : r.intercept / r.intercept_se;
    r.intercept_p = r.degenerate ? nan : students_t_two_sided(r.intercept_t, df);
  }
  if (r.degenerate) {
    r.f_statistic = nan;
    r.prob_f = nan;
  } else {
    r.f_statistic = ((sst - sse) / static_cast<double>(p)) / (sse / df);
    r.prob_f = f_survival(r.f_statistic, static_cast<double>(p), df);
  }
  return r;
}

// ---------------------------------------------------------------------------

MeanSd mean_sd(std::span<const double> v) {
  MeanSd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

std::vector<PValueBucket> p_value_buckets(const OlsResult& r, std::span<const double> thresholds) {
  if (thresholds.empty() || thresholds.front() != 0.0)
    fail(ErrorCode::InvalidArgument, "p-value thresholds must start at 0");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1] && thresholds[i] < 1.0))
      fail(ErrorCode::InvalidArgument, "p-value thresholds must increase within [0, 1)");

  auto bucket = [](std::string name, double lo, double hi) {
    PValueBucket b;
    b.label = std::move(name);
    b.lo = lo;
    b.hi = hi;
    return b;
  };
  std::vector<PValueBucket> buckets;
  buckets.push_back(bucket("p = 0", 0.0, kPZero));
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    buckets.push_back(bucket("p < " + label(thresholds[i]), i == 1 ? kPZero : thresholds[i - 1], thresholds[i]));
  buckets.push_back(bucket("p > " + label(thresholds.back()), thresholds.back(), 1.0));
  if (thresholds.size() == 1) buckets.back().lo = kPZero;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const PValueBucket undefined = bucket("undefined", nan, nan);

  std::vector<std::vector<double>> ps(buckets.size() + 1), ts(buckets.size() + 1), ses(buckets.size() + 1);
  for (std::size_t j = 0; j < r.p.size(); ++j) {
    std::size_t b = buckets.size();
    if (!std::isnan(r.p[j])) {
      for (b = 0; b + 1 < buckets.size(); ++b)
        if (r.p[j] < buckets[b].hi) break;
    }
    ps[b].push_back(r.p[j]);
    ts[b].push_back(r.t[j]);
    ses[b].push_back(r.se[j]);
  }
  if (!ps.back().empty()) buckets.push_back(undefined);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    buckets[b].count = ps[b].size();
    buckets[b].p = mean_sd(ps[b]);
    buckets[b].t = mean_sd(ts[b]);
    buckets[b].se = mean_sd(ses[b]);
  }
  return buckets;
}

std::string_view basis_key(ImportanceBasis b) noexcept {
  switch (b) {
    case ImportanceBasis::FeatureFamily: return "family";
    case ImportanceBasis::Signal: return "signal";
    case ImportanceBasis::EegChannel: return "eeg_channel";
    case ImportanceBasis::EegPsdBand: return "eeg_psd_band";
  }
  return "?";
}

ImportanceGroupReport grouped_importance(std::span<const double> importances,
                                         std::span<const FeatureDescriptor> descriptors,
                                         ImportanceBasis basis) {
  if (importances.size() != descriptors.size())
    fail(ErrorCode::LengthMismatch, "importance vector and descriptors differ in length");
  std::map<std::string, std::vector<double>> members;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const auto& d = descriptors[i];
    switch (basis) {
      case ImportanceBasis::FeatureFamily: members[std::string(family_name(d.family))].push_back(importances[i]); break;
      case ImportanceBasis::Signal: members[std::string(modality_name(d.modality))].push_back(importances[i]); break;
      case ImportanceBasis::EegChannel:
        if (d.modality == ModalityKind::EEG) members[d.channel].push_back(importances[i]);
        break;
      case ImportanceBasis::EegPsdBand:
        if (d.modality == ModalityKind::EEG && d.family == FeatureFamily::PSD) members[d.detail].push_back(importances[i]);
        break;
    }
  }
  ImportanceGroupReport rep;
  rep.basis = basis;
  for (const auto& [key, v] : members) {
    const MeanSd ms = mean_sd(v);
    rep.groups.push_back({key, ms.mean, ms.sd / std::sqrt(static_cast<double>(v.size())), v.size()});
  }
  std::stable_sort(rep.groups.begin(), rep.groups.end(),
                   [](const ImportanceGroup& a, const ImportanceGroup& b) { return a.mean > b.mean; });
  return rep;
}

std::string significance_csv(const OlsResult& r, std::span<const std::string> names,
                             std::span<const std::size_t> indices) {
  if (names.size() != r.coef.size()) fail(ErrorCode::LengthMismatch, "one name per coefficient expected");
  if (!indices.empty() && indices.size() != names.size())
    fail(ErrorCode::LengthMismatch, "one index per coefficient expected");
  std::string out = "index,name,coef,se,t,p\n";
  if (r.has_intercept) {
    out += "-1,(intercept)," + fmt(r.intercept) + "," + fmt(r.intercept_se) + "," + fmt(r.intercept_t) + "," +
           fmt(r.intercept_p) + "\n";
  }
  for (std::size_t j = 0; j < names.size(); ++j) {
    out += std::to_string(indices.empty() ? j : indices[j]) + "," + names[j] + "," + fmt(r.coef[j]) + "," + fmt(r.se[j]) + "," + fmt(r.t[j]) +
           "," + fmt(r.p[j]) + "\n";
  }
  return out;
}

std::string buckets_csv(const std::vector<PValueBucket>& buckets) {
  std::string out = "bucket,lo,hi,count,p_mean,p_sd,t_mean,t_sd,se_mean,se_sd\n";
  for (const auto& b : buckets) {
    out += b.label + "," + fmt(b.lo) + "," + fmt(b.hi) + "," + std::to_string(b.count) + "," + fmt(b.p.mean) +
           "," + fmt(b.p.sd) + "," + fmt(b.t.mean) + "," + fmt(b.t.sd) + "," + fmt(b.se.mean) + "," +
           fmt(b.se.sd) + "\n";
  }
  return out;
}

std::string importance_csv(const ImportanceGroupReport& rep) {
  std::string out = "group,mean,se,count\n";
  for (const auto& g : rep.groups)
    out += g.key + "," + fmt(g.mean) + "," + fmt(g.se) + "," + std::to_string(g.count) + "\n";
  return out;
}

}  // namespace hdsig
