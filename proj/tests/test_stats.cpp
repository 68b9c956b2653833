#include <cmath>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "doctest.h"

#include "hdsig/rng.hpp"
#include "hdsig/stats.hpp"
#include "test_util.hpp"

using namespace hdsig;
using test::code_of;

namespace {

double boost_two_sided(double t, double df) {
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
}

struct Regression {
  Matrix X;
  std::vector<double> y;
};

Regression random_regression(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  Regression r{Matrix(n, p), std::vector<double>(n)};
  std::vector<double> beta(p), scale(p);
  for (std::size_t j = 0; j < p; ++j) {
    beta[j] = rng.normal();
    scale[j] = std::pow(10.0, rng.uniform(-3.0, 3.0));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double v = 1.5;
    for (std::size_t j = 0; j < p; ++j) {
      r.X(i, j) = scale[j] * (rng.normal() + 2.0);
      v += beta[j] * r.X(i, j) / scale[j];
    }
    r.y[i] = v + rng.normal();
  }
  return r;
}

OlsResult with_p_values(std::vector<double> p) {
  OlsResult r;
  r.p = p;
  r.t.assign(p.size(), 1.0);
  r.se.assign(p.size(), 0.1);
  r.coef.assign(p.size(), 0.1);
  return r;
}

std::vector<FeatureDescriptor> small_layout() {
  std::vector<FeatureDescriptor> d;
  for (const char* ch : {"C3", "C4"}) {
    d.push_back({ModalityKind::EEG, ch, FeatureFamily::Hjorth, "activity"});
    d.push_back({ModalityKind::EEG, ch, FeatureFamily::PSD, "alpha"});
    d.push_back({ModalityKind::EEG, ch, FeatureFamily::PSD, "beta"});
  }
  d.push_back({ModalityKind::ECG, "ECG", FeatureFamily::Hjorth, "activity"});
  d.push_back({ModalityKind::ECG, "ECG", FeatureFamily::PSD, "LF"});
  d.push_back({ModalityKind::FNIRS, "N1_HbO", FeatureFamily::Wavelet, "approx_mean"});
  d.push_back({ModalityKind::FNIRS, "N1_HbR", FeatureFamily::Statistical, "kurtosis"});
  return d;
}

}  // namespace

TEST_CASE("incomplete beta and distribution tails") {
  for (double a : {0.5, 1.0, 2.5, 10.0, 50.0})
    for (double b : {0.5, 1.0, 3.0, 40.0})
      for (double x : {0.0, 1e-6, 0.1, 0.37, 0.5, 0.9, 0.999999, 1.0})
        CHECK(incomplete_beta(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-12));

  // scipy.stats.t.sf and f.sf values
  CHECK(students_t_two_sided(0.5, 3) == doctest::Approx(0.65144796484815104).epsilon(1e-12));
  CHECK(students_t_two_sided(2.0, 10) == doctest::Approx(0.073388034770740393).epsilon(1e-12));
  CHECK(students_t_two_sided(-1.3, 7.5) == doctest::Approx(0.23212677881560856).epsilon(1e-12));
  CHECK(students_t_two_sided(4.0, 100) == doctest::Approx(0.0001215236443007616).epsilon(1e-11));
  CHECK(students_t_two_sided(12.0, 5) == doctest::Approx(7.0894925171615278e-05).epsilon(1e-11));
  CHECK(f_survival(1.0, 3, 10) == doctest::Approx(0.43233720302169698).epsilon(1e-12));
  CHECK(f_survival(2.5, 5, 40) == doctest::Approx(0.046276763968031466).epsilon(1e-12));
  CHECK(f_survival(0.2, 2, 2) == doctest::Approx(0.83333333333333337).epsilon(1e-12));

  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const double df = 1.0 + rng.uniform(0.0, 300.0);
    const double t = rng.normal() * 6.0;
    const double p = students_t_two_sided(t, df);
    CHECK(p == doctest::Approx(boost_two_sided(t, df)).epsilon(1e-9));
    const double cdf = boost::math::cdf(boost::math::students_t(df), t);
    CHECK(students_t_cdf(t, df) == doctest::Approx(cdf).epsilon(1e-9));
    const double f = std::exp(rng.uniform(-3.0, 3.0));
    const double d1 = 1.0 + rng.below(30), d2 = 2.0 + rng.below(500);
    const double sf = boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, d2), f));
    CHECK(f_survival(f, d1, d2) == doctest::Approx(sf).epsilon(1e-9));
  }
  const double tiny = students_t_two_sided(60.0, 200.0);
  CHECK(tiny > 0.0);
  CHECK(tiny == doctest::Approx(boost_two_sided(60.0, 200.0)).epsilon(1e-8));
}

TEST_CASE("ols closed forms") {
  Matrix x(3, 1);
  x(0, 0) = 1;
  x(1, 0) = 2;
  x(2, 0) = 3;
  const std::vector<double> y = {1, 2, 2};
  const auto r = ols_fit(x, y);
  CHECK(r.coef[0] == doctest::Approx(0.5));
  CHECK(r.intercept == doctest::Approx(2.0 / 3.0));
  CHECK(r.n == 3);
  CHECK(r.n_features == 1);
  // SSE = 1/6, sigma^2 = 1/6, Sxx = 2
  CHECK(r.sigma2 == doctest::Approx(1.0 / 6.0));
  CHECK(r.se[0] == doctest::Approx(std::sqrt(1.0 / 12.0)));
  CHECK(r.r_squared == doctest::Approx(0.75));
  CHECK(r.p[0] == doctest::Approx(boost_two_sided(r.t[0], 1.0)).epsilon(1e-12));

  Matrix line(5, 1);
  std::vector<double> twice(5);
  for (std::size_t i = 0; i < 5; ++i) {
    line(i, 0) = static_cast<double>(i) + 1.0;
    twice[i] = 2.0 * line(i, 0);
  }
  const auto exact = ols_fit(line, twice);
  CHECK(exact.coef[0] == doctest::Approx(2.0));
  CHECK(std::abs(exact.intercept) < 1e-12);
  CHECK(exact.r_squared == doctest::Approx(1.0));
  CHECK(exact.sigma2 < 1e-20);
  CHECK(exact.degenerate);
  CHECK(std::isnan(exact.p[0]));
  CHECK(std::isnan(exact.t[0]));
  const auto b = p_value_buckets(exact);
  CHECK(b.back().label == "undefined");
  CHECK(b.back().count == 1);
}

TEST_CASE("ols simple regression matches textbook formulas") {
  Rng rng(12);
  const std::size_t n = 200;
  Matrix x(n, 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1e4 + 50.0 * rng.normal();
    y[i] = 3.0 - 0.02 * x(i, 0) + rng.normal();
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x(i, 0) / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x(i, 0) - mx) * (x(i, 0) - mx);
    sxy += (x(i, 0) - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx, icpt = my - slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) sse += std::pow(y[i] - icpt - slope * x(i, 0), 2);
  const double s2 = sse / static_cast<double>(n - 2);
  const auto r = ols_fit(x, y);
  CHECK(r.coef[0] == doctest::Approx(slope).epsilon(1e-9));
  CHECK(r.intercept == doctest::Approx(icpt).epsilon(1e-9));
  CHECK(r.se[0] == doctest::Approx(std::sqrt(s2 / sxx)).epsilon(1e-9));
  CHECK(r.intercept_se == doctest::Approx(std::sqrt(s2 * (1.0 / n + mx * mx / sxx))).epsilon(1e-8));
  const double ll = -0.5 * n * (std::log(2 * M_PI * sse / n) + 1.0);
  CHECK(r.log_likelihood == doctest::Approx(ll).epsilon(1e-10));
  CHECK(r.f_statistic == doctest::Approx(r.t[0] * r.t[0]).epsilon(1e-9));
}

TEST_CASE("ols residual orthogonality and t-p consistency") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t p = 1 + seed % 8;
    const auto reg = random_regression(60 + 5 * seed, p, seed);
    const auto r = ols_fit(reg.X, reg.y);
    double worst = 0.0, resid_sum = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double dot = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < reg.y.size(); ++i) {
        dot += reg.X(i, j) * r.residuals[i];
        scale += std::abs(reg.X(i, j) * reg.y[i]);
      }
      worst = std::max(worst, std::abs(dot) / scale);
    }
    for (double e : r.residuals) resid_sum += e;
    CHECK(worst < 1e-6);
    CHECK(std::abs(resid_sum) < 1e-8 * static_cast<double>(reg.y.size()));
    const double df = static_cast<double>(r.n - p - 1);
    for (std::size_t j = 0; j < p; ++j) {
      CHECK(r.p[j] >= 0.0);
      CHECK(r.p[j] <= 1.0);
      CHECK(std::abs(r.p[j] - boost_two_sided(r.t[j], df)) <= 1e-9);
    }
    CHECK(r.r_squared >= 0.0);
    CHECK(r.r_squared <= 1.0);
  }
}

TEST_CASE("ols under the null and with added noise columns") {
  int above = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    Matrix X(1000, 3);
    std::vector<double> y(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      for (std::size_t j = 0; j < 3; ++j) X(i, j) = rng.normal();
      y[i] = 4.0 + rng.normal();
    }
    above += ols_fit(X, y).prob_f > 0.01;
  }
  CHECK(above >= 90);

  const auto reg = random_regression(80, 3, 5);
  Matrix wider(80, 4);
  Rng rng(6);
  for (std::size_t i = 0; i < 80; ++i) {
    for (std::size_t j = 0; j < 3; ++j) wider(i, j) = reg.X(i, j);
    wider(i, 3) = rng.normal();
  }
  CHECK(ols_fit(wider, reg.y).r_squared >= ols_fit(reg.X, reg.y).r_squared);
}

TEST_CASE("ols rank and size errors") {
  const auto reg = random_regression(50, 3, 2);
  Matrix dup(50, 4);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 3; ++j) dup(i, j) = reg.X(i, j);
    dup(i, 3) = 2.0 * reg.X(i, 1) - reg.X(i, 0);
  }
  CHECK(code_of([&] { ols_fit(dup, reg.y); }) == ErrorCode::RankDeficient);
  const auto bad = rank_deficient_columns(dup);
  CHECK(bad.size() == 1);
  CHECK(rank_deficient_columns(reg.X).empty());

  Matrix constant = reg.X;
  for (std::size_t i = 0; i < 50; ++i) constant(i, 2) = 7.0;
  CHECK(rank_deficient_columns(constant) == std::vector<std::size_t>{2});

  Matrix few(4, 3, 1.0);
  const std::vector<double> y4 = {1, 2, 3, 4};
  CHECK(code_of([&] { ols_fit(few, y4); }) == ErrorCode::TooFewRows);

  const auto no_icpt = ols_fit(reg.X, reg.y, false);
  CHECK_FALSE(no_icpt.has_intercept);
  CHECK(no_icpt.intercept == 0.0);
}

TEST_CASE("p-value buckets") {
  const auto all_half = p_value_buckets(with_p_values(std::vector<double>(7, 0.5)));
  REQUIRE(all_half.size() == 5);
  for (std::size_t i = 0; i + 1 < all_half.size(); ++i) CHECK(all_half[i].count == 0);
  CHECK(all_half.back().label == "p > 0.05");
  CHECK(all_half.back().count == 7);
  CHECK(all_half.back().p.mean == doctest::Approx(0.5));

  const auto mixed = p_value_buckets(with_p_values({0.0, 1e-320, 1e-10, 0.0005, 0.005, 0.03, 0.05, 0.9}));
  const std::size_t want[] = {2, 2, 1, 1, 2};
  std::size_t total = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(mixed[i].count == want[i]);
    total += mixed[i].count;
  }
  CHECK(total == 8);
  CHECK(mixed[0].label == "p = 0");
  CHECK(mixed[1].label == "p < 0.001");
  CHECK(buckets_csv(mixed).find("p < 0.01") != std::string::npos);

  const double custom[] = {0.0, 0.1};
  CHECK(p_value_buckets(with_p_values({0.05, 0.5}), custom).size() == 3);
  const double bad[] = {0.01, 0.1};
  CHECK(code_of([&] { p_value_buckets(with_p_values({0.5}), bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("mean and sample sd") {
  const std::vector<double> v = {1, 2, 3, 4};
  const auto m = mean_sd(v);
  CHECK(m.mean == 2.5);
  CHECK(m.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(mean_sd(std::vector<double>{3.0}).sd == 0.0);
}

TEST_CASE("grouped importance") {
  const auto desc = small_layout();
  const std::vector<double> uniform(desc.size(), 1.0 / static_cast<double>(desc.size()));
  const auto fam = grouped_importance(uniform, desc, ImportanceBasis::FeatureFamily);
  for (const auto& g : fam.groups) CHECK(g.mean == doctest::Approx(uniform[0]).epsilon(1e-12));
  const auto sig = grouped_importance(uniform, desc, ImportanceBasis::Signal);
  for (const auto& g : sig.groups) CHECK(g.se <= 1e-12);

  std::vector<double> ecg_heavy(desc.size(), 0.01);
  ecg_heavy[6] = ecg_heavy[7] = 0.4;
  const auto top = grouped_importance(ecg_heavy, desc, ImportanceBasis::Signal);
  CHECK(top.groups.front().key == "ECG");
  for (std::size_t i = 1; i < top.groups.size(); ++i) CHECK(top.groups[i - 1].mean >= top.groups[i].mean);

  Rng rng(3);
  std::vector<double> imp(desc.size());
  for (auto& v : imp) v = rng.uniform();
  const double global = std::accumulate(imp.begin(), imp.end(), 0.0) / static_cast<double>(imp.size());
  for (auto basis : {ImportanceBasis::FeatureFamily, ImportanceBasis::Signal}) {
    const auto rep = grouped_importance(imp, desc, basis);
    double weighted = 0.0;
    std::size_t count = 0;
    for (const auto& g : rep.groups) {
      weighted += g.mean * static_cast<double>(g.count);
      count += g.count;
    }
    CHECK(count == desc.size());
    CHECK(std::abs(weighted / static_cast<double>(count) - global) <= 1e-12);
  }

  const auto ch = grouped_importance(imp, desc, ImportanceBasis::EegChannel);
  CHECK(ch.groups.size() == 2);
  CHECK(ch.groups[0].count == 3);
  const auto band = grouped_importance(imp, desc, ImportanceBasis::EegPsdBand);
  CHECK(band.groups.size() == 2);
  for (const auto& g : band.groups) CHECK(g.count == 2);
  CHECK(importance_csv(band).rfind("group,mean,se,count\n", 0) == 0);

  const std::vector<double> short_imp(3, 0.1);
  CHECK(code_of([&] { grouped_importance(short_imp, desc, ImportanceBasis::Signal); }) ==
        ErrorCode::LengthMismatch);
  CHECK(basis_key(ImportanceBasis::EegPsdBand) == "eeg_psd_band");
}

TEST_CASE("significance table") {
  const auto reg = random_regression(40, 2, 9);
  const auto r = ols_fit(reg.X, reg.y);
  const std::vector<std::string> names = {"a", "b"};
  const std::vector<std::size_t> idx = {4, 9};
  const auto csv = significance_csv(r, names, idx);
  CHECK(csv.find("-1,(intercept),") != std::string::npos);
  CHECK(csv.find("\n4,a,") != std::string::npos);
  CHECK(csv.find("\n9,b,") != std::string::npos);
}
