#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"

#include "hdsig/eval.hpp"
#include "hdsig/rng.hpp"
#include "hdsig/signal_io.hpp"
#include "test_util.hpp"

using namespace hdsig;
using test::code_of;

namespace {

double brute_force_auc(std::span<const int> y, std::span<const double> s) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

struct GroupedData {
  Matrix X;
  std::vector<int> y;
  std::vector<std::string> groups;
};

/// `n_groups` patients of `rows` epochs; labels alternate by patient. With
/// `signal` > 0 column 0 shifts with the label.
GroupedData grouped(std::size_t n_groups, std::size_t rows, std::size_t p, double signal, std::uint64_t seed) {
  Rng rng(seed);
  GroupedData d{Matrix(n_groups * rows, p), {}, {}};
  std::vector<int> labels(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) labels[g] = static_cast<int>(g % 2);
  rng.shuffle(labels.begin(), labels.end());
  for (std::size_t g = 0; g < n_groups; ++g) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = g * rows + r;
      for (std::size_t j = 0; j < p; ++j) d.X(i, j) = rng.normal();
      d.X(i, 0) += signal * (labels[g] ? 1.0 : -1.0);
      d.y.push_back(labels[g]);
      d.groups.push_back("G" + std::to_string(g));
    }
  }
  return d;
}

ModelSpec small_forest(ModelKind kind = ModelKind::ExtraTrees, std::size_t trees = 30) {
  auto spec = ModelSpec::defaults(kind);
  spec.tree.n_estimators = trees;
  return spec;
}

}  // namespace

TEST_CASE("confusion matrices") {
  const std::vector<int> t = {0, 1, 0, 1};
  CHECK(confusion_matrix(t, t) == ConfusionMatrix{2, 0, 0, 2});
  const std::vector<int> flipped = {1, 0, 1, 0};
  CHECK(confusion_matrix(t, flipped) == ConfusionMatrix{0, 2, 2, 0});
  const std::vector<int> a = {0, 0, 1, 1}, b = {0, 1, 1, 1};
  CHECK(confusion_matrix(a, b) == ConfusionMatrix{1, 1, 0, 2});
  const std::vector<int> short_pred = {0, 1};
  CHECK(code_of([&] { confusion_matrix(t, short_pred); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("basic metrics") {
  const std::vector<int> t = {0, 1, 1, 0, 1};
  const auto perfect = basic_metrics(t, t);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const std::vector<int> none(5, 0);
  const auto neg = basic_metrics(t, none);
  CHECK(neg.recall == 0.0);
  CHECK(neg.precision == 0.0);
  CHECK(neg.precision_degenerate);
  CHECK_FALSE(neg.recall_degenerate);

  const auto m = basic_metrics(ConfusionMatrix{1, 1, 1, 2});
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.accuracy == doctest::Approx(3.0 / 5.0));
}

TEST_CASE("roc auc") {
  const std::vector<int> y = {0, 0, 1, 1};
  const std::vector<double> ranked = {0.1, 0.2, 0.8, 0.9};
  CHECK(roc_auc(y, ranked) == 1.0);
  const std::vector<double> ties(4, 0.3);
  CHECK(roc_auc(y, ties) == 0.5);
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  CHECK(roc_auc(y, s) == doctest::Approx(0.75));
  const std::vector<int> one(4, 1);
  CHECK(code_of([&] { roc_auc(one, s); }) == ErrorCode::OneClassOnly);

  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<int> yy(n);
    std::vector<double> ss(n);
    for (std::size_t i = 0; i < n; ++i) {
      yy[i] = rng.uniform() < 0.4 ? 1 : 0;
      ss[i] = static_cast<double>(rng.below(12)) / 4.0;  // plenty of ties
    }
    yy[0] = 0;
    yy[1] = 1;
    CHECK(std::abs(roc_auc(yy, ss) - brute_force_auc(yy, ss)) <= 1e-12);
  }
}

TEST_CASE("roc and pr curves") {
  const std::vector<int> y = {0, 0, 1, 1};
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const auto roc = roc_curve(y, s);
  REQUIRE(roc.size() == 5);
  CHECK(std::isinf(roc.front().threshold));
  CHECK(roc.front().x == 0.0);
  CHECK(roc.front().y == 0.0);
  CHECK(roc.back().x == 1.0);
  CHECK(roc.back().y == 1.0);
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].x - roc[i - 1].x) * 0.5 * (roc[i].y + roc[i - 1].y);
  CHECK(area == doctest::Approx(0.75));

  const auto pr = pr_curve(y, s);
  REQUIRE(pr.size() == 4);
  CHECK(pr.front().threshold == 0.8);
  CHECK(pr.front().y == 1.0);
  CHECK(pr.back().x == 1.0);
  CHECK(pr.back().y == 0.5);
  // precision 1 at recall 1/2, then 2/3 at recall 1
  CHECK(average_precision(y, s) == doctest::Approx(0.5 * 1.0 + 0.5 * 2.0 / 3.0));
  const std::vector<double> perfect = {0.1, 0.2, 0.8, 0.9};
  CHECK(average_precision(y, perfect) == 1.0);

  CHECK(threshold_predictions(std::vector<double>{0.2, 0.5, 0.51}) == std::vector<int>{0, 0, 1});
  CHECK(curve_csv(roc, "fpr", "tpr").rfind("threshold,fpr,tpr\n", 0) == 0);
}

TEST_CASE("group k-fold plans") {
  Rng rng(2);
  std::vector<std::string> groups;
  std::map<std::string, std::size_t> sizes;
  for (int g = 0; g < 69; ++g) {
    const std::size_t n = 250 + rng.below(51);
    const auto id = "patient" + std::to_string(g);
    sizes[id] = n;
    for (std::size_t i = 0; i < n; ++i) groups.push_back(id);
  }
  rng.shuffle(groups.begin(), groups.end());
  const auto plan = group_kfold_split(groups, 10, 7);
  REQUIRE(plan.folds.size() == 10);
  std::map<std::string, int> seen;
  std::size_t lo = SIZE_MAX, hi = 0, largest = 0;
  for (const auto& [id, n] : sizes) largest = std::max(largest, n);
  for (std::size_t f = 0; f < 10; ++f) {
    std::size_t rows = 0;
    for (const auto& g : plan.folds[f].test_groups) {
      ++seen[g];
      rows += sizes[g];
    }
    CHECK(plan.test_rows(groups, f).size() == rows);
    CHECK(plan.train_rows(groups, f).size() + rows == groups.size());
    lo = std::min(lo, rows);
    hi = std::max(hi, rows);
  }
  CHECK(seen.size() == 69);
  for (const auto& [g, c] : seen) CHECK(c == 1);
  CHECK(hi - lo <= largest);

  const std::vector<std::string> four = {"a", "a", "b", "c", "c", "c", "d"};
  const auto p4 = group_kfold_split(four, 2, 1);
  CHECK(p4.folds[0].test_groups.size() == 2);
  CHECK(p4.folds[1].test_groups.size() == 2);

  const std::vector<std::string> three = {"a", "b", "c"};
  CHECK(code_of([&] { group_kfold_split(three, 5, 0); }) == ErrorCode::TooFewGroups);
  CHECK(code_of([&] { group_kfold_split(three, 1, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("fold plans never leak groups") {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n_groups = 2 + rng.below(60);
    const std::size_t k = 2 + rng.below(std::min<std::size_t>(n_groups - 1, 10));
    std::vector<std::string> groups;
    for (std::size_t g = 0; g < n_groups; ++g)
      for (std::size_t r = 0, n = 1 + rng.below(20); r < n; ++r) groups.push_back("g" + std::to_string(g));
    rng.shuffle(groups.begin(), groups.end());
    const auto plan = group_kfold_split(groups, k, rng.next());
    std::set<std::string> covered;
    for (std::size_t f = 0; f < k; ++f) {
      const auto& fold = plan.folds[f];
      std::vector<std::string> both;
      std::set_intersection(fold.train_groups.begin(), fold.train_groups.end(), fold.test_groups.begin(),
                            fold.test_groups.end(), std::back_inserter(both));
      CHECK(both.empty());
      CHECK(fold.train_groups.size() + fold.test_groups.size() == n_groups);
      for (const auto& g : fold.test_groups) CHECK(covered.insert(g).second);
    }
    CHECK(covered.size() == n_groups);
  }
}

TEST_CASE("cross validation on separable groups") {
  const auto d = grouped(20, 15, 4, 4.0, 1);
  const auto r = cross_validate(small_forest(), d.X, d.y, d.groups, 5, 3, 1);
  CHECK(r.pooled.accuracy >= 0.99);
  CHECK(r.pooled_confusion.total() == d.y.size());
  CHECK(static_cast<double>(r.pooled_confusion.tn + r.pooled_confusion.tp) /
            static_cast<double>(r.pooled_confusion.total()) ==
        r.pooled.accuracy);
  CHECK(r.folds.size() == 5);
  CHECK(r.oof_scores.size() == d.y.size());
  std::size_t rows = 0;
  for (const auto& f : r.folds) rows += f.test_rows;
  CHECK(rows == d.y.size());
  CHECK(r.pooled_roc_auc >= 0.99);
  CHECK(r.pooled_pr_auc >= 0.99);
}

TEST_CASE("cross validation null with group-constant labels") {
  // Pooled out-of-fold scores are shifted per fold by the training base
  // rate, which biases the pooled AUC low when folds are class-unbalanced;
  // the per-fold AUC is free of that effect.
  double fold_mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = grouped(40, 10, 5, 0.0, 50 + seed);
    const auto r = cross_validate(small_forest(ModelKind::ExtraTrees, 50), d.X, d.y, d.groups, 5, seed, 1);
    REQUIRE(r.fold_mean_roc_auc.has_value());
    fold_mean += *r.fold_mean_roc_auc / 5.0;
  }
  CHECK(std::abs(fold_mean - 0.5) <= 0.05);
}

TEST_CASE("cross validation is deterministic and order independent") {
  const auto d = grouped(12, 8, 3, 0.8, 4);
  const auto spec = small_forest(ModelKind::RandomForest, 20);
  const auto a = cross_validate(spec, d.X, d.y, d.groups, 4, 11, 1);
  const auto b = cross_validate(spec, d.X, d.y, d.groups, 4, 11, 3);
  CHECK(to_json(a).dump() == to_json(b).dump());

  std::vector<std::size_t> perm(d.y.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(8);
  rng.shuffle(perm.begin(), perm.end());
  GroupedData p{d.X.select_rows(perm), {}, {}};
  for (auto i : perm) {
    p.y.push_back(d.y[i]);
    p.groups.push_back(d.groups[i]);
  }
  const auto c = cross_validate(spec, p.X, p.y, p.groups, 4, 11, 1);
  CHECK(to_json(c).dump() == to_json(a).dump());
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(c.oof_scores[i] == a.oof_scores[perm[i]]);

  const auto other = cross_validate(spec, d.X, d.y, d.groups, 4, 12, 1);
  CHECK(to_json(other).dump() != to_json(a).dump());

  for (auto kind : {ModelKind::LogReg, ModelKind::LDA, ModelKind::QDA}) {
    const auto r = cross_validate(ModelSpec::defaults(kind), d.X, d.y, d.groups, 4, 11, 1);
    CHECK(r.pooled_roc_auc > 0.5);
  }
}

TEST_CASE("cross validation annotates fold errors") {
  auto d = grouped(6, 4, 2, 1.0, 2);
  // only G0 is positive, so the fold that tests it trains on a single class
  for (std::size_t i = 0; i < d.y.size(); ++i) d.y[i] = d.groups[i] == "G0" ? 1 : 0;
  try {
    cross_validate(ModelSpec::defaults(ModelKind::QDA), d.X, d.y, d.groups, 3, 1, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("fold ") == 0);
    CHECK(e.code() == ErrorCode::SingleClass);
  }
  std::vector<int> short_y(3, 0);
  CHECK(code_of([&] { cross_validate(small_forest(), d.X, short_y, d.groups, 3, 1, 1); }) ==
        ErrorCode::LengthMismatch);
}

TEST_CASE("eval report files") {
  const auto d = grouped(8, 5, 2, 3.0, 6);
  const auto r = cross_validate(small_forest(ModelKind::ExtraTrees, 10), d.X, d.y, d.groups, 4, 2, 1);
  const auto dir = test::scratch_dir("eval");
  write_eval_report(r, dir, "ert");
  CHECK(std::filesystem::exists(dir / "ert_report.json"));
  CHECK(std::filesystem::exists(dir / "ert_roc.csv"));
  CHECK(std::filesystem::exists(dir / "ert_pr.csv"));
  const auto j = nlohmann::json::parse(read_text_file(dir / "ert_report.json"));
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("folds").size() == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("random search") {
  const auto d = grouped(10, 6, 3, 1.0, 3);
  const auto base = small_forest(ModelKind::ExtraTrees, 10);

  const ParamGrid one = {{"n_estimators", {nlohmann::json(15)}}};
  const auto r1 = random_search(base, one, 3, d.X, d.y, d.groups, 5, 4, 1);
  REQUIRE(r1.leaderboard.size() == 1);
  CHECK(r1.best().params.at("n_estimators") == 15);
  CHECK(r1.best().report.spec.tree.n_estimators == 15);

  const ParamGrid grid = {{"n_estimators", {5, 10, 20}}, {"min_samples_leaf", {1, 3}}};
  const auto all = random_search(base, grid, 50, d.X, d.y, d.groups, 5, 4, 1);
  CHECK(all.leaderboard.size() == 6);
  std::set<std::string> distinct;
  for (const auto& e : all.leaderboard) distinct.insert(e.params.dump());
  CHECK(distinct.size() == 6);
  for (std::size_t i = 1; i < all.leaderboard.size(); ++i)
    CHECK(all.leaderboard[i - 1].report.pooled_roc_auc >= all.leaderboard[i].report.pooled_roc_auc);

  const auto some = random_search(base, grid, 3, d.X, d.y, d.groups, 5, 4, 1);
  CHECK(some.leaderboard.size() == 3);
  const auto again = random_search(base, grid, 3, d.X, d.y, d.groups, 5, 4, 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(some.leaderboard[i].params == again.leaderboard[i].params);

  CHECK(code_of([&] { random_search(base, ParamGrid{}, 3, d.X, d.y, d.groups, 5, 4, 1); }) ==
        ErrorCode::EmptyGrid);
  CHECK(apply_params(ModelSpec::defaults(ModelKind::LogReg), {{"l2", 0.5}}).logreg.l2 == 0.5);
}
