#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hdsig/matrix.hpp"

namespace hdsig {

enum class ModelKind { RandomForest, ExtraTrees, LogReg, LDA, QDA };

/// Short names used on the command line and in reports: rf, ert, logreg, lda, qda.
std::string_view model_key(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view key);

// ---------------------------------------------------------------------------
// Tree ensembles

enum class ForestMode { RandomForest, ExtraTrees };
enum class MaxFeatures { Sqrt, All, Fraction };

struct TreeParams {
  std::size_t n_estimators = 100;
  MaxFeatures max_features = MaxFeatures::Sqrt;
  double fraction = 1.0;  ///< used when max_features == Fraction
  std::size_t min_samples_leaf = 1;
  std::size_t max_depth = 0;  ///< 0 = unlimited
  ForestMode mode = ForestMode::ExtraTrees;
  std::uint64_t seed = 0;

  void validate() const;
  /// Candidate features examined per node for a matrix of width p.
  std::size_t candidates(std::size_t p) const;
  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

/// Internal nodes have feature >= 0 and send x[feature] <= threshold left.
/// Leaves keep the (possibly bootstrap-weighted) class counts.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double count0 = 0.0;
  double count1 = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;        ///< nodes[0] is the root
  std::vector<double> gini_decrease;  ///< unnormalized, one per feature

  /// Class-1 frequency of the leaf reached by x.
  double predict(std::span<const double> x) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

/// Grows one tree on the given row indices (repeats allowed).
Tree fit_tree(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
              const TreeParams& params, std::uint64_t seed);

/// n draws with replacement from [0, n), sorted.
std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed);

struct ForestModel {
  TreeParams params;
  std::vector<Tree> trees;
  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

// ---------------------------------------------------------------------------
// Linear and Gaussian models

struct LogRegParams {
  double l2 = 1.0;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  friend bool operator==(const LogRegParams&, const LogRegParams&) = default;
};

struct LogRegModel {
  LogRegParams params;
  std::vector<double> center, scale;  ///< training standardization
  std::vector<double> weights_std;    ///< weights on standardized features
  double intercept_std = 0.0;
  std::vector<double> weights;        ///< folded back onto raw features
  double intercept = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double gradient_max_norm = 0.0;
  friend bool operator==(const LogRegModel&, const LogRegModel&) = default;
};

/// Mean log-loss plus (l2 / 2n) |w|^2 on an already standardized matrix;
/// the intercept is not penalized. Writes the gradient when `grad_w` is
/// non-empty.
double logreg_objective(const Matrix& Z, std::span<const int> y, double l2, std::span<const double> w,
                        double b, std::span<double> grad_w = {}, double* grad_b = nullptr);

struct GaussianModel {
  bool quadratic = false;  ///< false: LDA (pooled covariance), true: QDA
  double reg = 0.0;
  std::vector<double> center, scale;
  std::vector<double> means[2];      ///< standardized class means
  std::vector<double> precision[2];  ///< row-major p x p inverses of the shrunk covariances
  double log_det[2] = {0.0, 0.0};
  double log_prior[2] = {0.0, 0.0};
  friend bool operator==(const GaussianModel&, const GaussianModel&) = default;
};

// ---------------------------------------------------------------------------

struct TrainedModel {
  ModelKind kind = ModelKind::ExtraTrees;
  std::size_t feature_count = 0;
  std::variant<ForestModel, LogRegModel, GaussianModel> impl;
  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Per-tree RNG streams come from mix_seed(params.seed, tree index), so the
/// result does not depend on `threads`.
TrainedModel fit_forest(const Matrix& X, std::span<const int> y, const TreeParams& params,
                        std::size_t threads = 0);
TrainedModel fit_logreg(const Matrix& X, std::span<const int> y, const LogRegParams& params = {});
TrainedModel fit_lda(const Matrix& X, std::span<const int> y, double reg = 0.0);
TrainedModel fit_qda(const Matrix& X, std::span<const int> y, double reg = 0.0);

/// rows x 2: column 0 = P(class 0), column 1 = P(class 1).
Matrix predict_proba(const TrainedModel& m, const Matrix& X, std::size_t threads = 0);

struct Importances {
  std::vector<double> mean;     ///< sums to 1 unless every tree is a single leaf
  std::vector<double> tree_sd;  ///< SD across trees of per-tree normalized importances
};

Importances feature_importances(const TrainedModel& m);

/// Everything needed to fit one model family.
struct ModelSpec {
  ModelKind kind = ModelKind::ExtraTrees;
  TreeParams tree;
  LogRegParams logreg;
  double lda_reg = 1e-4;
  double qda_reg = 0.05;

  static ModelSpec defaults(ModelKind kind);
};

/// Fits `spec` with its seed replaced by `seed` (forests only).
TrainedModel fit_model(const ModelSpec& spec, const Matrix& X, std::span<const int> y,
                       std::uint64_t seed, std::size_t threads = 0);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainedModel& m);
TrainedModel model_from_json(const nlohmann::json& j);

/// Shared input checks: finite X, binary y, matching lengths, both classes.
void check_training_data(const Matrix& X, std::span<const int> y);

}  // namespace hdsig
