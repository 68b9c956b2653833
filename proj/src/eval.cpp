#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "hdsig/error.hpp"
#include "hdsig/eval.hpp"
#include "hdsig/parallel.hpp"
#include "hdsig/rng.hpp"
#include "hdsig/signal_io.hpp"

namespace hdsig {

using nlohmann::json;

namespace {

constexpr int kReportSchemaVersion = 1;

std::vector<std::size_t> rows_where(std::span<const std::string> groups, const std::vector<std::string>& set) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (std::binary_search(set.begin(), set.end(), groups[i])) out.push_back(i);
  return out;
}

// Order rows by group id, then by feature values, then label.
std::vector<std::size_t> canonical_order(const Matrix& X, std::span<const int> y,
                                         std::span<const std::string> groups) {
  std::vector<std::size_t> idx(X.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (groups[a] != groups[b]) return groups[a] < groups[b];
    const auto ra = X.row(a), rb = X.row(b);
    if (auto c = std::lexicographical_compare_three_way(ra.begin(), ra.end(), rb.begin(), rb.end()); c != 0)
      return c < 0;
    return y[a] < y[b];
  });
  return idx;
}

json metrics_json(const BasicMetrics& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"precision_degenerate", m.precision_degenerate},
          {"recall_degenerate", m.recall_degenerate}};
}

json confusion_json(const ConfusionMatrix& cm) {
  return json::array({json::array({cm.tn, cm.fp}), json::array({cm.fn, cm.tp})});
}

json curve_json(const std::vector<CurvePoint>& c) {
  json out = json::array();
  for (const auto& p : c) {
    json t = std::isfinite(p.threshold) ? json(p.threshold) : json("inf");
    out.push_back(json::array({std::move(t), p.x, p.y}));
  }
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::size_t> FoldPlan::test_rows(std::span<const std::string> groups, std::size_t fold) const {
  return rows_where(groups, folds.at(fold).test_groups);
}

std::vector<std::size_t> FoldPlan::train_rows(std::span<const std::string> groups, std::size_t fold) const {
  return rows_where(groups, folds.at(fold).train_groups);
}

FoldPlan group_kfold_split(std::span<const std::string> groups, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::InvalidArgument, "k must be at least 2");
  std::map<std::string, std::size_t> sizes;
  for (const auto& g : groups) ++sizes[g];
  if (sizes.size() < k)
    fail(ErrorCode::TooFewGroups, std::to_string(sizes.size()) + " groups cannot fill " +
                                      std::to_string(k) + " folds");

  std::vector<std::pair<std::string, std::size_t>> order(sizes.begin(), sizes.end());
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::size_t> load(k, 0);
  std::vector<std::vector<std::string>> test(k);
  for (const auto& [g, n] : order) {
    const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    load[f] += n;
    test[f].push_back(g);
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(test[f].begin(), test[f].end());
    plan.folds[f].test_groups = test[f];
    for (const auto& [g, n] : sizes)
      if (!std::binary_search(test[f].begin(), test[f].end(), g)) plan.folds[f].train_groups.push_back(g);
  }
  return plan;
}

EvalReport cross_validate(const ModelSpec& spec, const Matrix& X, std::span<const int> y,
                          std::span<const std::string> groups, std::size_t k, std::uint64_t seed,
                          std::size_t threads) {
  if (X.rows() != y.size() || X.rows() != groups.size())
    fail(ErrorCode::LengthMismatch, "X, y and groups must have the same number of rows");

  const auto canon = canonical_order(X, y, groups);
  const Matrix Xc = X.select_rows(canon);
  std::vector<int> yc(canon.size());
  std::vector<std::string> gc(canon.size());
  for (std::size_t i = 0; i < canon.size(); ++i) {
    yc[i] = y[canon[i]];
    gc[i] = groups[canon[i]];
  }

  const FoldPlan plan = group_kfold_split(gc, k, seed);
  EvalReport r;
  r.spec = spec;
  r.k = k;
  r.seed = seed;
  r.folds.resize(k);
  std::vector<double> scores(canon.size(), 0.0);

  parallel_for(k, threads, [&](std::size_t f) {
    const auto train = plan.train_rows(gc, f);
    const auto test = plan.test_rows(gc, f);
    std::vector<int> ytr(train.size()), yte(test.size());
    for (std::size_t i = 0; i < train.size(); ++i) ytr[i] = yc[train[i]];
    for (std::size_t i = 0; i < test.size(); ++i) yte[i] = yc[test[i]];
    Matrix proba;
    try {
      const auto model = fit_model(spec, Xc.select_rows(train), ytr, mix_seed(seed, f), 1);
      proba = predict_proba(model, Xc.select_rows(test), 1);
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
    }
    std::vector<double> s(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      s[i] = proba(i, 1);
      scores[test[i]] = s[i];
    }
    FoldResult& fr = r.folds[f];
    fr.fold = f;
    fr.test_groups = plan.folds[f].test_groups;
    fr.test_rows = test.size();
    fr.confusion = confusion_matrix(yte, threshold_predictions(s));
    fr.metrics = basic_metrics(fr.confusion);
    const bool both = std::find(yte.begin(), yte.end(), 0) != yte.end() &&
                      std::find(yte.begin(), yte.end(), 1) != yte.end();
    if (both) fr.roc_auc = roc_auc(yte, s);
  });

  r.pooled_confusion = confusion_matrix(yc, threshold_predictions(scores));
  r.pooled = basic_metrics(r.pooled_confusion);
  r.pooled_roc_auc = roc_auc(yc, scores);
  r.pooled_pr_auc = average_precision(yc, scores);
  r.roc = roc_curve(yc, scores);
  r.pr = pr_curve(yc, scores);

  double auc_sum = 0.0;
  std::size_t auc_n = 0;
  for (const auto& fr : r.folds) {
    r.fold_mean.accuracy += fr.metrics.accuracy / static_cast<double>(k);
    r.fold_mean.precision += fr.metrics.precision / static_cast<double>(k);
    r.fold_mean.recall += fr.metrics.recall / static_cast<double>(k);
    r.fold_mean.f1 += fr.metrics.f1 / static_cast<double>(k);
    r.fold_mean.precision_degenerate |= fr.metrics.precision_degenerate;
    r.fold_mean.recall_degenerate |= fr.metrics.recall_degenerate;
    if (fr.roc_auc) {
      auc_sum += *fr.roc_auc;
      ++auc_n;
    }
  }
  if (auc_n > 0) r.fold_mean_roc_auc = auc_sum / static_cast<double>(auc_n);

  r.oof_scores.assign(canon.size(), 0.0);
  for (std::size_t i = 0; i < canon.size(); ++i) r.oof_scores[canon[i]] = scores[i];
  return r;
}

json to_json(const EvalReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"test_groups", f.test_groups},
                     {"test_rows", f.test_rows},
                     {"confusion", confusion_json(f.confusion)},
                     {"metrics", metrics_json(f.metrics)},
                     {"roc_auc", f.roc_auc ? json(*f.roc_auc) : json(nullptr)}});
  }
  json pooled = metrics_json(r.pooled);
  pooled["roc_auc"] = r.pooled_roc_auc;
  pooled["pr_auc"] = r.pooled_pr_auc;
  json fold_mean = metrics_json(r.fold_mean);
  fold_mean["roc_auc"] = r.fold_mean_roc_auc ? json(*r.fold_mean_roc_auc) : json(nullptr);
  return {{"schema_version", kReportSchemaVersion},
          {"model", to_json(r.spec)},
          {"k", r.k},
          {"seed", r.seed},
          {"pooled", std::move(pooled)},
          {"fold_mean", std::move(fold_mean)},
          {"confusion", confusion_json(r.pooled_confusion)},
          {"folds", std::move(folds)},
          {"roc", curve_json(r.roc)},
          {"pr", curve_json(r.pr)}};
}

std::string curve_csv(const std::vector<CurvePoint>& curve, const char* x_name, const char* y_name) {
  std::string out = std::string("threshold,") + x_name + "," + y_name + "\n";
  for (const auto& p : curve) out += fmt(p.threshold) + "," + fmt(p.x) + "," + fmt(p.y) + "\n";
  return out;
}

void write_eval_report(const EvalReport& r, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / (name + "_report.json"), to_json(r).dump(2) + "\n");
  write_text_file(dir / (name + "_roc.csv"), curve_csv(r.roc, "fpr", "tpr"));
  write_text_file(dir / (name + "_pr.csv"), curve_csv(r.pr, "recall", "precision"));
}

// ---------------------------------------------------------------------------

ModelSpec apply_params(const ModelSpec& base, const json& params) {
  static const std::set<std::string> tree_keys{"n_estimators", "max_features", "fraction",
                                               "min_samples_leaf", "max_depth"};
  static const std::set<std::string> logreg_keys{"l2", "max_iter", "tol"};
  json j = to_json(base);
  for (const auto& [key, value] : params.items()) {
    const bool forest = base.kind == ModelKind::RandomForest || base.kind == ModelKind::ExtraTrees;
    if (forest && tree_keys.count(key)) j["tree"][key] = value;
    else if (base.kind == ModelKind::LogReg && logreg_keys.count(key)) j["logreg"][key] = value;
    else if ((base.kind == ModelKind::LDA || base.kind == ModelKind::QDA) && key == "reg") j["reg"] = value;
    else fail(ErrorCode::InvalidArgument, "parameter '" + key + "' does not apply to " +
                                              std::string(model_key(base.kind)));
  }
  return model_spec_from_json(j);
}

SearchResult random_search(const ModelSpec& base, const ParamGrid& grid, std::size_t n_draws,
                           const Matrix& X, std::span<const int> y, std::span<const std::string> groups,
                           std::size_t k, std::uint64_t seed, std::size_t threads) {
  if (grid.empty()) fail(ErrorCode::EmptyGrid, "parameter grid is empty");
  if (n_draws < 1) fail(ErrorCode::InvalidArgument, "n_draws must be at least 1");
  std::size_t total = 1;
  for (const auto& [name, values] : grid) {
    if (values.empty()) fail(ErrorCode::EmptyGrid, "parameter '" + name + "' has no values");
    total *= values.size();
  }

  std::vector<std::size_t> combos(total);
  std::iota(combos.begin(), combos.end(), std::size_t{0});
  const std::size_t draws = std::min(n_draws, total);
  if (draws < total) {
    Rng rng(mix_seed(seed, 0x5ea4c1));
    for (std::size_t i = 0; i < draws; ++i) std::swap(combos[i], combos[i + rng.below(total - i)]);
    combos.resize(draws);
  }

  SearchResult res;
  for (std::size_t d = 0; d < draws; ++d) {
    json params = json::object();
    std::size_t rest = combos[d];
    for (const auto& [name, values] : grid) {
      params[name] = values[rest % values.size()];
      rest /= values.size();
    }
    SearchEntry e;
    e.draw = d;
    e.params = params;
    e.report = cross_validate(apply_params(base, params), X, y, groups, k, seed, threads);
    res.leaderboard.push_back(std::move(e));
  }
  std::stable_sort(res.leaderboard.begin(), res.leaderboard.end(), [](const SearchEntry& a, const SearchEntry& b) {
    return a.report.pooled_roc_auc > b.report.pooled_roc_auc;
  });
  return res;
}

}  // namespace hdsig
