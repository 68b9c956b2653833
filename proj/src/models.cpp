#include <algorithm>
#include <cmath>

#include "hdsig/error.hpp"
#include "hdsig/models.hpp"
#include "hdsig/parallel.hpp"

namespace hdsig {

using nlohmann::json;

Matrix predict_linear_proba(const LogRegModel& m, const Matrix& X);
Matrix predict_gaussian_proba(const GaussianModel& g, const Matrix& X);

namespace {

constexpr int kModelFormatVersion = 1;

std::string_view max_features_key(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::Sqrt: return "sqrt";
    case MaxFeatures::All: return "all";
    case MaxFeatures::Fraction: return "fraction";
  }
  return "?";
}

MaxFeatures parse_max_features(std::string_view s) {
  if (s == "sqrt") return MaxFeatures::Sqrt;
  if (s == "all") return MaxFeatures::All;
  if (s == "fraction") return MaxFeatures::Fraction;
  fail(ErrorCode::ParseError, "unknown max_features '" + std::string(s) + "'");
}

json tree_params_json(const TreeParams& p) {
  return {{"n_estimators", p.n_estimators},
          {"max_features", max_features_key(p.max_features)},
          {"fraction", p.fraction},
          {"min_samples_leaf", p.min_samples_leaf},
          {"max_depth", p.max_depth},
          {"mode", p.mode == ForestMode::RandomForest ? "random_forest" : "extra_trees"},
          {"seed", p.seed}};
}

TreeParams tree_params_from_json(const json& j, TreeParams p) {
  p.n_estimators = j.value("n_estimators", p.n_estimators);
  if (j.contains("max_features")) p.max_features = parse_max_features(j.at("max_features").get<std::string>());
  p.fraction = j.value("fraction", p.fraction);
  p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
  p.max_depth = j.value("max_depth", p.max_depth);
  if (j.contains("mode")) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "random_forest") p.mode = ForestMode::RandomForest;
    else if (mode == "extra_trees") p.mode = ForestMode::ExtraTrees;
    else fail(ErrorCode::ParseError, "unknown forest mode '" + mode + "'");
  }
  p.seed = j.value("seed", p.seed);
  return p;
}

json logreg_params_json(const LogRegParams& p) {
  return {{"l2", p.l2}, {"max_iter", p.max_iter}, {"tol", p.tol}};
}

LogRegParams logreg_params_from_json(const json& j, LogRegParams p) {
  p.l2 = j.value("l2", p.l2);
  p.max_iter = j.value("max_iter", p.max_iter);
  p.tol = j.value("tol", p.tol);
  return p;
}

}  // namespace

std::string_view model_key(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::RandomForest: return "rf";
    case ModelKind::ExtraTrees: return "ert";
    case ModelKind::LogReg: return "logreg";
    case ModelKind::LDA: return "lda";
    case ModelKind::QDA: return "qda";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view key) {
  for (auto k : {ModelKind::RandomForest, ModelKind::ExtraTrees, ModelKind::LogReg, ModelKind::LDA,
                 ModelKind::QDA})
    if (key == model_key(k)) return k;
  fail(ErrorCode::UsageError, "unknown model '" + std::string(key) + "' (expected rf, ert, logreg, lda or qda)");
}

void TreeParams::validate() const {
  if (n_estimators < 1) fail(ErrorCode::InvalidArgument, "n_estimators must be at least 1");
  if (max_features == MaxFeatures::Fraction && !(fraction > 0.0 && fraction <= 1.0))
    fail(ErrorCode::InvalidArgument, "max_features fraction must be in (0, 1]");
  if (min_samples_leaf < 1) fail(ErrorCode::InvalidArgument, "min_samples_leaf must be at least 1");
}

std::size_t TreeParams::candidates(std::size_t p) const {
  std::size_t k = p;
  if (max_features == MaxFeatures::Sqrt)
    k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))));
  else if (max_features == MaxFeatures::Fraction)
    k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(p)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(p, 1));
}

TrainedModel fit_forest(const Matrix& X, std::span<const int> y, const TreeParams& params,
                        std::size_t threads) {
  params.validate();
  check_training_data(X, y);
  ForestModel f;
  f.params = params;
  f.trees.resize(params.n_estimators);
  const std::size_t n = X.rows();
  parallel_for(params.n_estimators, threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = mix_seed(params.seed, t);
    std::vector<std::size_t> rows;
    if (params.mode == ForestMode::RandomForest) {
      rows = bootstrap_rows(n, mix_seed(tree_seed, 1));
    } else {
      rows.resize(n);
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }
    f.trees[t] = fit_tree(X, y, rows, params, tree_seed);
  });
  return {params.mode == ForestMode::RandomForest ? ModelKind::RandomForest : ModelKind::ExtraTrees,
          X.cols(), std::move(f)};
}

Matrix predict_proba(const TrainedModel& m, const Matrix& X, std::size_t threads) {
  if (X.cols() != m.feature_count)
    fail(ErrorCode::FeatureCountMismatch, "model expects " + std::to_string(m.feature_count) +
                                              " features, got " + std::to_string(X.cols()));
  if (!X.all_finite()) fail(ErrorCode::NonFiniteInput, "prediction matrix has non-finite entries");
  if (const auto* lr = std::get_if<LogRegModel>(&m.impl)) return predict_linear_proba(*lr, X);
  if (const auto* g = std::get_if<GaussianModel>(&m.impl)) return predict_gaussian_proba(*g, X);

  const auto& f = std::get<ForestModel>(m.impl);
  Matrix out(X.rows(), 2);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (X.rows() + kBlock - 1) / kBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t end = std::min(X.rows(), (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      double s = 0.0;
      for (const auto& tree : f.trees) s += tree.predict(X.row(i));
      const double p1 = s / static_cast<double>(f.trees.size());
      out(i, 1) = p1;
      out(i, 0) = 1.0 - p1;
    }
  });
  return out;
}

Importances feature_importances(const TrainedModel& m) {
  const auto* f = std::get_if<ForestModel>(&m.impl);
  if (!f) fail(ErrorCode::NotAForest, "feature importances need a tree ensemble");
  const std::size_t p = m.feature_count, t = f->trees.size();
  std::vector<std::vector<double>> per_tree(t, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < t; ++i) {
    double total = 0.0;
    for (double v : f->trees[i].gini_decrease) total += v;
    if (total > 0.0)
      for (std::size_t j = 0; j < p; ++j) per_tree[i][j] = f->trees[i].gini_decrease[j] / total;
  }
  Importances out;
  out.mean.assign(p, 0.0);
  out.tree_sd.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < t; ++i) s += per_tree[i][j];
    const double mean = s / static_cast<double>(t);
    double ss = 0.0;
    for (std::size_t i = 0; i < t; ++i) ss += (per_tree[i][j] - mean) * (per_tree[i][j] - mean);
    out.mean[j] = mean;
    out.tree_sd[j] = t > 1 ? std::sqrt(ss / static_cast<double>(t - 1)) : 0.0;
  }
  double total = 0.0;
  for (double v : out.mean) total += v;
  if (total > 0.0)
    for (double& v : out.mean) v /= total;
  return out;
}

// ---------------------------------------------------------------------------

ModelSpec ModelSpec::defaults(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  s.tree.mode = kind == ModelKind::RandomForest ? ForestMode::RandomForest : ForestMode::ExtraTrees;
  return s;
}

TrainedModel fit_model(const ModelSpec& spec, const Matrix& X, std::span<const int> y,
                       std::uint64_t seed, std::size_t threads) {
  switch (spec.kind) {
    case ModelKind::RandomForest:
    case ModelKind::ExtraTrees: {
      TreeParams p = spec.tree;
      p.mode = spec.kind == ModelKind::RandomForest ? ForestMode::RandomForest : ForestMode::ExtraTrees;
      p.seed = seed;
      return fit_forest(X, y, p, threads);
    }
    case ModelKind::LogReg: return fit_logreg(X, y, spec.logreg);
    case ModelKind::LDA: return fit_lda(X, y, spec.lda_reg);
    case ModelKind::QDA: return fit_qda(X, y, spec.qda_reg);
  }
  fail(ErrorCode::InvalidArgument, "unknown model kind");
}

json to_json(const ModelSpec& spec) {
  json j{{"model", model_key(spec.kind)}};
  switch (spec.kind) {
    case ModelKind::RandomForest:
    case ModelKind::ExtraTrees: j["tree"] = tree_params_json(spec.tree); break;
    case ModelKind::LogReg: j["logreg"] = logreg_params_json(spec.logreg); break;
    case ModelKind::LDA: j["reg"] = spec.lda_reg; break;
    case ModelKind::QDA: j["reg"] = spec.qda_reg; break;
  }
  return j;
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s = ModelSpec::defaults(parse_model_kind(j.at("model").get<std::string>()));
  if (j.contains("tree")) s.tree = tree_params_from_json(j.at("tree"), s.tree);
  s.tree.mode = s.kind == ModelKind::RandomForest ? ForestMode::RandomForest : ForestMode::ExtraTrees;
  if (j.contains("logreg")) s.logreg = logreg_params_from_json(j.at("logreg"), s.logreg);
  if (j.contains("reg")) {
    if (s.kind == ModelKind::LDA) s.lda_reg = j.at("reg").get<double>();
    if (s.kind == ModelKind::QDA) s.qda_reg = j.at("reg").get<double>();
  }
  return s;
}

json to_json(const TrainedModel& m) {
  json j{{"format_version", kModelFormatVersion},
         {"kind", model_key(m.kind)},
         {"feature_count", m.feature_count}};
  if (const auto* f = std::get_if<ForestModel>(&m.impl)) {
    j["params"] = tree_params_json(f->params);
    json trees = json::array();
    for (const auto& t : f->trees) {
      json nodes = json::array();
      for (const auto& n : t.nodes)
        nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.count0, n.count1}));
      trees.push_back({{"nodes", std::move(nodes)}, {"gini_decrease", t.gini_decrease}});
    }
    j["trees"] = std::move(trees);
  } else if (const auto* lr = std::get_if<LogRegModel>(&m.impl)) {
    j["params"] = logreg_params_json(lr->params);
    j["center"] = lr->center;
    j["scale"] = lr->scale;
    j["weights_std"] = lr->weights_std;
    j["intercept_std"] = lr->intercept_std;
    j["weights"] = lr->weights;
    j["intercept"] = lr->intercept;
    j["iterations"] = lr->iterations;
    j["converged"] = lr->converged;
    j["gradient_max_norm"] = lr->gradient_max_norm;
  } else {
    const auto& g = std::get<GaussianModel>(m.impl);
    j["quadratic"] = g.quadratic;
    j["reg"] = g.reg;
    j["center"] = g.center;
    j["scale"] = g.scale;
    for (int c = 0; c < 2; ++c) {
      j["classes"].push_back({{"mean", g.means[c]},
                              {"precision", g.precision[c]},
                              {"log_det", g.log_det[c]},
                              {"log_prior", g.log_prior[c]}});
    }
  }
  return j;
}

TrainedModel model_from_json(const json& j) {
  if (j.value("format_version", 0) != kModelFormatVersion)
    fail(ErrorCode::ParseError, "unsupported model format version");
  TrainedModel m;
  m.kind = parse_model_kind(j.at("kind").get<std::string>());
  m.feature_count = j.at("feature_count").get<std::size_t>();
  switch (m.kind) {
    case ModelKind::RandomForest:
    case ModelKind::ExtraTrees: {
      ForestModel f;
      f.params = tree_params_from_json(j.at("params"), TreeParams{});
      for (const auto& jt : j.at("trees")) {
        Tree t;
        for (const auto& jn : jt.at("nodes")) {
          t.nodes.push_back({jn[0].get<std::int32_t>(), jn[1].get<double>(), jn[2].get<std::int32_t>(),
                             jn[3].get<std::int32_t>(), jn[4].get<double>(), jn[5].get<double>()});
        }
        t.gini_decrease = jt.at("gini_decrease").get<std::vector<double>>();
        f.trees.push_back(std::move(t));
      }
      m.impl = std::move(f);
      break;
    }
    case ModelKind::LogReg: {
      LogRegModel lr;
      lr.params = logreg_params_from_json(j.at("params"), LogRegParams{});
      lr.center = j.at("center").get<std::vector<double>>();
      lr.scale = j.at("scale").get<std::vector<double>>();
      lr.weights_std = j.at("weights_std").get<std::vector<double>>();
      lr.intercept_std = j.at("intercept_std").get<double>();
      lr.weights = j.at("weights").get<std::vector<double>>();
      lr.intercept = j.at("intercept").get<double>();
      lr.iterations = j.at("iterations").get<std::size_t>();
      lr.converged = j.at("converged").get<bool>();
      lr.gradient_max_norm = j.at("gradient_max_norm").get<double>();
      m.impl = std::move(lr);
      break;
    }
    case ModelKind::LDA:
    case ModelKind::QDA: {
      GaussianModel g;
      g.quadratic = j.at("quadratic").get<bool>();
      g.reg = j.at("reg").get<double>();
      g.center = j.at("center").get<std::vector<double>>();
      g.scale = j.at("scale").get<std::vector<double>>();
      for (int c = 0; c < 2; ++c) {
        const auto& jc = j.at("classes").at(static_cast<std::size_t>(c));
        g.means[c] = jc.at("mean").get<std::vector<double>>();
        g.precision[c] = jc.at("precision").get<std::vector<double>>();
        g.log_det[c] = jc.at("log_det").get<double>();
        g.log_prior[c] = jc.at("log_prior").get<double>();
      }
      m.impl = std::move(g);
      break;
    }
  }
  return m;
}

}  // namespace hdsig
