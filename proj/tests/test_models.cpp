#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "hdsig/eval.hpp"
#include "hdsig/models.hpp"
#include "hdsig/rng.hpp"
#include "test_util.hpp"

using namespace hdsig;
using test::code_of;

namespace {

struct Data {
  Matrix X;
  std::vector<int> y;
};

Data blobs(std::size_t n, double sep, std::uint64_t seed, std::size_t p = 2) {
  Rng rng(seed);
  Data d{Matrix(n, p), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    d.y[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < p; ++j) d.X(i, j) = rng.normal() + (d.y[i] ? sep : -sep);
  }
  return d;
}

/// Only column 0 carries the label; the rest is noise.
Data one_informative(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, p), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    d.y[i] = rng.uniform() < 0.5 ? 0 : 1;
    d.X(i, 0) = (d.y[i] ? 1.5 : -1.5) + 0.5 * rng.normal();
    for (std::size_t j = 1; j < p; ++j) d.X(i, j) = rng.normal();
  }
  return d;
}

Data pure_noise(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, p), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    d.y[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < p; ++j) d.X(i, j) = rng.normal();
  }
  return d;
}

double accuracy(const Matrix& P, std::span<const int> y) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += ((P(i, 1) > 0.5) == (y[i] == 1));
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

void check_probabilities(const Matrix& P) {
  for (std::size_t i = 0; i < P.rows(); ++i) {
    CHECK(P(i, 0) >= 0.0);
    CHECK(P(i, 1) <= 1.0);
    CHECK(std::abs(P(i, 0) + P(i, 1) - 1.0) <= 1e-9);
  }
}

TreeParams forest(ForestMode mode, std::size_t n, std::uint64_t seed) {
  TreeParams t;
  t.mode = mode;
  t.n_estimators = n;
  t.seed = seed;
  return t;
}

}  // namespace

TEST_CASE("forests separate blobs") {
  const auto d = blobs(200, 2.0, 1);
  for (auto mode : {ForestMode::RandomForest, ForestMode::ExtraTrees}) {
    const auto m = fit_forest(d.X, d.y, forest(mode, 100, 3));
    const auto P = predict_proba(m, d.X);
    CHECK(accuracy(P, d.y) >= 0.99);
    check_probabilities(P);
    CHECK(m.feature_count == 2);
    CHECK(m.kind == (mode == ForestMode::RandomForest ? ModelKind::RandomForest : ModelKind::ExtraTrees));
  }
}

TEST_CASE("forest input validation") {
  auto d = blobs(20, 1.0, 2);
  std::vector<int> same(20, 1);
  CHECK(code_of([&] { fit_forest(d.X, same, forest(ForestMode::ExtraTrees, 5, 0)); }) == ErrorCode::SingleClass);
  auto bad = d.X;
  bad(3, 1) = std::nan("");
  CHECK(code_of([&] { fit_forest(bad, d.y, forest(ForestMode::ExtraTrees, 5, 0)); }) == ErrorCode::NonFiniteInput);
  const auto m = fit_forest(d.X, d.y, forest(ForestMode::ExtraTrees, 5, 0));
  CHECK(code_of([&] { predict_proba(m, Matrix(2, 3)); }) == ErrorCode::FeatureCountMismatch);
  CHECK(code_of([&] { predict_proba(m, bad); }) == ErrorCode::NonFiniteInput);
  TreeParams zero;
  zero.n_estimators = 0;
  CHECK(code_of([&] { zero.validate(); }) == ErrorCode::InvalidArgument);
  TreeParams frac;
  frac.max_features = MaxFeatures::Fraction;
  frac.fraction = 1.5;
  CHECK(code_of([&] { frac.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("candidate feature counts") {
  TreeParams t;
  CHECK(t.candidates(948) == 30);
  CHECK(t.candidates(2) == 1);
  t.max_features = MaxFeatures::All;
  CHECK(t.candidates(17) == 17);
  t.max_features = MaxFeatures::Fraction;
  t.fraction = 0.25;
  CHECK(t.candidates(10) >= 2);
  CHECK(t.candidates(10) <= 3);
}

TEST_CASE("hand-built models predict by construction") {
  ForestModel f;
  f.params.n_estimators = 2;
  Tree leaf;
  leaf.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, 4.0});
  leaf.gini_decrease = {0.0};
  f.trees = {leaf, leaf};
  const TrainedModel pure{ModelKind::ExtraTrees, 1, f};
  const auto P = predict_proba(pure, Matrix(3, 1, 0.7));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(P(i, 0) == 0.0);
    CHECK(P(i, 1) == 1.0);
  }

  LogRegModel lr;
  lr.center = {0.0, 0.0};
  lr.scale = {1.0, 1.0};
  lr.weights_std = lr.weights = {0.0, 0.0};
  const TrainedModel flat{ModelKind::LogReg, 2, lr};
  const auto Q = predict_proba(flat, Matrix(4, 2, 3.0));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(Q(i, 0) == 0.5);
    CHECK(Q(i, 1) == 0.5);
  }
}

TEST_CASE("forest permutation null") {
  // labels permuted at random against noise features; 5-fold CV, 5 seeds
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto d = pure_noise(300, 6, 100 + seed);
    Rng rng(seed);
    rng.shuffle(d.y.begin(), d.y.end());
    std::vector<std::string> groups(d.y.size());
    for (std::size_t i = 0; i < groups.size(); ++i) groups[i] = "r" + std::to_string(i);
    auto spec = ModelSpec::defaults(ModelKind::RandomForest);
    spec.tree.n_estimators = 50;
    const auto r = cross_validate(spec, d.X, d.y, groups, 5, seed, 1);
    REQUIRE(r.fold_mean_roc_auc.has_value());
    total += *r.fold_mean_roc_auc;
  }
  CHECK(std::abs(total / 5.0 - 0.5) <= 0.05);
}

TEST_CASE("forest training log-loss falls with more trees") {
  const auto d = one_informative(300, 5, 8);
  const std::size_t sizes[] = {1, 5, 25, 100};
  double loss[4] = {0, 0, 0, 0};
  const std::uint64_t seeds = 20;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    for (int s = 0; s < 4; ++s) {
      auto t = forest(ForestMode::RandomForest, sizes[s], seed);
      t.min_samples_leaf = 5;
      const auto P = predict_proba(fit_forest(d.X, d.y, t), d.X);
      for (std::size_t i = 0; i < d.y.size(); ++i) {
        const double p = std::clamp(P(i, static_cast<std::size_t>(d.y[i])), 1e-15, 1.0);
        loss[s] -= std::log(p) / static_cast<double>(seeds * d.y.size());
      }
    }
  }
  for (int s = 1; s < 4; ++s) CHECK(loss[s] <= loss[s - 1] + 1e-3);
}

TEST_CASE("forest determinism, threads and serialization") {
  const auto d = one_informative(150, 8, 4);
  for (auto mode : {ForestMode::RandomForest, ForestMode::ExtraTrees}) {
    const auto t = forest(mode, 30, 17);
    const auto a = fit_forest(d.X, d.y, t, 1);
    const auto b = fit_forest(d.X, d.y, t, 4);
    CHECK(a == b);
    CHECK(predict_proba(a, d.X, 1) == predict_proba(b, d.X, 3));
    const auto c = fit_forest(d.X, d.y, forest(mode, 30, 18), 1);
    CHECK_FALSE(a == c);

    const auto back = model_from_json(nlohmann::json::parse(to_json(a).dump()));
    CHECK(back == a);
    CHECK(predict_proba(back, d.X) == predict_proba(a, d.X));
  }
}

TEST_CASE("tree predictions are invariant to a common positive scale") {
  const auto d = one_informative(200, 6, 12);
  Matrix scaled = d.X;
  for (auto& v : scaled.data()) v *= 3.7;
  Rng rng(5);
  Matrix probe(300, 6), probe_scaled(300, 6);
  for (std::size_t i = 0; i < 300; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      probe(i, j) = 2.0 * rng.normal();
      probe_scaled(i, j) = 3.7 * probe(i, j);
    }
  for (auto mode : {ForestMode::RandomForest, ForestMode::ExtraTrees}) {
    const auto t = forest(mode, 40, 2);
    const auto P = predict_proba(fit_forest(d.X, d.y, t), probe);
    const auto Q = predict_proba(fit_forest(scaled, d.y, t), probe_scaled);
    for (std::size_t i = 0; i < 300; ++i) CHECK((P(i, 1) > 0.5) == (Q(i, 1) > 0.5));
  }
}

TEST_CASE("feature importances") {
  const auto d = one_informative(400, 10, 21);
  const auto m = fit_forest(d.X, d.y, forest(ForestMode::ExtraTrees, 100, 1));
  const auto imp = feature_importances(m);
  REQUIRE(imp.mean.size() == 10);
  CHECK(imp.mean[0] > 0.8);
  CHECK(std::accumulate(imp.mean.begin(), imp.mean.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(imp.tree_sd.size() == 10);
  for (double s : imp.tree_sd) CHECK(s >= 0.0);

  const auto n = pure_noise(400, 10, 3);
  const auto noise_imp = feature_importances(fit_forest(n.X, n.y, forest(ForestMode::ExtraTrees, 100, 1)));
  for (double v : noise_imp.mean) CHECK(v < 2.0 / 10.0);

  const auto lr = fit_logreg(d.X, d.y);
  CHECK(code_of([&] { feature_importances(lr); }) == ErrorCode::NotAForest);
}

TEST_CASE("logistic regression") {
  Matrix x(4, 1);
  const double xs[] = {-2, -1, 1, 2};
  for (int i = 0; i < 4; ++i) x(static_cast<std::size_t>(i), 0) = xs[i];
  const std::vector<int> y = {0, 0, 1, 1};
  const auto m = fit_logreg(x, y);
  const auto P = predict_proba(m, x);
  for (std::size_t i = 1; i < 4; ++i) CHECK(P(i, 1) > P(i - 1, 1));
  check_probabilities(P);

  auto d = one_informative(200, 3, 2);
  Matrix with_zero(200, 4);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = 0; j < 3; ++j) with_zero(i, j) = d.X(i, j);
    with_zero(i, 3) = 0.0;
  }
  const auto z = fit_logreg(with_zero, d.y);
  const auto& lz = std::get<LogRegModel>(z.impl);
  CHECK(lz.converged);
  CHECK(lz.weights[3] == 0.0);
  CHECK(lz.gradient_max_norm < lz.params.tol);

  // finite-difference gradient at the optimum
  Matrix Z(200, 4);
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 4; ++j) Z(i, j) = (with_zero(i, j) - lz.center[j]) / lz.scale[j];
  std::vector<double> w = lz.weights_std;
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t j = 0; j <= 4; ++j) {
    auto wp = w, wm = w;
    double bp = lz.intercept_std, bm = lz.intercept_std;
    if (j < 4) {
      wp[j] += h;
      wm[j] -= h;
    } else {
      bp += h;
      bm -= h;
    }
    const double g = (logreg_objective(Z, d.y, 1.0, wp, bp) - logreg_objective(Z, d.y, 1.0, wm, bm)) / (2 * h);
    worst = std::max(worst, std::abs(g));
  }
  CHECK(worst < 1e-5);

  std::vector<double> gw(4);
  double gb = 0.0;
  logreg_objective(Z, d.y, 1.0, w, lz.intercept_std, gw, &gb);
  for (double g : gw) CHECK(std::abs(g) < lz.params.tol);
  CHECK(std::abs(gb) < lz.params.tol);

  LogRegParams short_run;
  short_run.max_iter = 1;
  short_run.tol = 1e-14;
  const auto early = fit_logreg(d.X, d.y, short_run);
  CHECK_FALSE(std::get<LogRegModel>(early.impl).converged);
  CHECK(std::get<LogRegModel>(early.impl).iterations == 1);
}

TEST_CASE("lda decision threshold on symmetric classes") {
  Rng rng(77);
  const std::size_t n = 4000;
  Matrix X(n, 1);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    X(i, 0) = rng.normal() + (y[i] ? 1.0 : -1.0);
  }
  const auto m = fit_lda(X, y);
  double lo = -3.0, hi = 3.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    Matrix q(1, 1, mid);
    (predict_proba(m, q)(0, 1) > 0.5 ? hi : lo) = mid;
  }
  CHECK(std::abs(0.5 * (lo + hi)) <= 0.1);
}

TEST_CASE("gaussian discriminants") {
  const auto d = blobs(4000, 1.0, 9, 3);
  const auto lda = fit_lda(d.X, d.y);
  const auto qda = fit_qda(d.X, d.y);
  check_probabilities(predict_proba(lda, d.X));
  check_probabilities(predict_proba(qda, d.X));

  Rng rng(1);
  Matrix grid(2000, 3);
  for (auto& v : grid.data()) v = rng.uniform(-3.0, 3.0);
  const auto Pl = predict_proba(lda, grid), Pq = predict_proba(qda, grid);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < grid.rows(); ++i) agree += ((Pl(i, 1) > 0.5) == (Pq(i, 1) > 0.5));
  CHECK(static_cast<double>(agree) / static_cast<double>(grid.rows()) >= 0.95);

  Matrix dup(d.X.rows(), 3);
  for (std::size_t i = 0; i < dup.rows(); ++i) {
    dup(i, 0) = d.X(i, 0);
    dup(i, 1) = d.X(i, 0);
    dup(i, 2) = d.X(i, 1);
  }
  CHECK(code_of([&] { fit_qda(dup, d.y, 0.0); }) == ErrorCode::SingularCovariance);
  CHECK(code_of([&] { fit_lda(dup, d.y, 0.0); }) == ErrorCode::SingularCovariance);
  check_probabilities(predict_proba(fit_qda(dup, d.y, 0.05), dup));

  Matrix small(5, 1);
  for (std::size_t i = 0; i < 5; ++i) small(i, 0) = static_cast<double>(i);
  const std::vector<int> ys = {0, 0, 0, 0, 1};
  CHECK(code_of([&] { fit_qda(small, ys); }) == ErrorCode::ClassTooSmall);

  const auto back = model_from_json(nlohmann::json::parse(to_json(qda).dump()));
  CHECK(predict_proba(back, grid) == predict_proba(qda, grid));
}

TEST_CASE("model specs") {
  for (auto kind : {ModelKind::RandomForest, ModelKind::ExtraTrees, ModelKind::LogReg, ModelKind::LDA,
                    ModelKind::QDA}) {
    const auto spec = ModelSpec::defaults(kind);
    CHECK(parse_model_kind(model_key(kind)) == kind);
    const auto back = model_spec_from_json(to_json(spec));
    CHECK(to_json(back) == to_json(spec));
    const auto d = blobs(60, 1.5, 3);
    const auto m = fit_model(spec, d.X, d.y, 5, 1);
    CHECK(m.kind == kind);
    check_probabilities(predict_proba(m, d.X));
  }
  CHECK(ModelSpec::defaults(ModelKind::RandomForest).tree.mode == ForestMode::RandomForest);
  CHECK(ModelSpec::defaults(ModelKind::ExtraTrees).tree.n_estimators == 100);
  CHECK(code_of([] { parse_model_kind("svm"); }) == ErrorCode::UsageError);
}
