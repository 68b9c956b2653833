#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hdsig/matrix.hpp"
#include "hdsig/models.hpp"

namespace hdsig {

// ---------------------------------------------------------------------------
// Fold plans

struct Fold {
  std::vector<std::string> train_groups;  ///< sorted
  std::vector<std::string> test_groups;   ///< sorted
};

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;

  /// Row indices whose group is in the test (or train) set of `fold`.
  std::vector<std::size_t> test_rows(std::span<const std::string> groups, std::size_t fold) const;
  std::vector<std::size_t> train_rows(std::span<const std::string> groups, std::size_t fold) const;
};

/// Group ids are sorted, shuffled by `seed`, ordered by row count (largest
/// first, stable), then each is dealt to the fold with the fewest rows so far.
FoldPlan group_kfold_split(std::span<const std::string> groups, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Metrics

struct ConfusionMatrix {
  std::size_t tn = 0, fp = 0, fn = 0, tp = 0;

  std::size_t total() const noexcept { return tn + fp + fn + tp; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred);

struct BasicMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_degenerate = false;  ///< no positive predictions; precision reported as 0
  bool recall_degenerate = false;     ///< no positive truths; recall reported as 0
};

BasicMetrics basic_metrics(const ConfusionMatrix& cm);
BasicMetrics basic_metrics(std::span<const int> y_true, std::span<const int> y_pred);

/// Probability that a random positive outranks a random negative, ties ½.
double roc_auc(std::span<const int> y_true, std::span<const double> scores);

struct CurvePoint {
  double threshold = 0.0;  ///< rows with score >= threshold are called positive
  double x = 0.0;
  double y = 0.0;
};

/// (threshold, FPR, TPR), one point per distinct score plus a leading
/// (+inf, 0, 0).
std::vector<CurvePoint> roc_curve(std::span<const int> y_true, std::span<const double> scores);
/// (threshold, recall, precision), one point per distinct score, descending.
std::vector<CurvePoint> pr_curve(std::span<const int> y_true, std::span<const double> scores);
/// Step-wise area under the PR curve (average precision).
double average_precision(std::span<const int> y_true, std::span<const double> scores);

/// Class-1 probability above 0.5 predicts class 1.
std::vector<int> threshold_predictions(std::span<const double> scores, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::string> test_groups;
  std::size_t test_rows = 0;
  ConfusionMatrix confusion;
  BasicMetrics metrics;
  std::optional<double> roc_auc;  ///< empty when the test fold holds one class
};

struct EvalReport {
  ModelSpec spec;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;

  ConfusionMatrix pooled_confusion;
  BasicMetrics pooled;
  double pooled_roc_auc = 0.0;
  double pooled_pr_auc = 0.0;
  BasicMetrics fold_mean;
  std::optional<double> fold_mean_roc_auc;

  std::vector<CurvePoint> roc;
  std::vector<CurvePoint> pr;
  std::vector<double> oof_scores;  ///< class-1 probability per input row; not serialized
};

/// Fits on each fold's training rows and scores its test rows. Rows are put
/// in a canonical order (group id, then row contents) before fitting, so the
/// report does not depend on the input row order. Forest seeds are derived
/// per fold from `seed`.
EvalReport cross_validate(const ModelSpec& spec, const Matrix& X, std::span<const int> y,
                          std::span<const std::string> groups, std::size_t k, std::uint64_t seed,
                          std::size_t threads = 0);

nlohmann::json to_json(const EvalReport& r);
std::string curve_csv(const std::vector<CurvePoint>& curve, const char* x_name, const char* y_name);

/// <dir>/<name>_report.json, <name>_roc.csv, <name>_pr.csv
void write_eval_report(const EvalReport& r, const std::filesystem::path& dir, const std::string& name);

// ---------------------------------------------------------------------------
// Random search

/// Parameter name -> candidate values. Names are n_estimators, max_features,
/// fraction, min_samples_leaf, max_depth (forests), l2, max_iter, tol
/// (logreg) or reg (lda, qda).
using ParamGrid = std::map<std::string, std::vector<nlohmann::json>>;

ModelSpec apply_params(const ModelSpec& base, const nlohmann::json& params);

struct SearchEntry {
  std::size_t draw = 0;
  nlohmann::json params;
  EvalReport report;
};

struct SearchResult {
  std::vector<SearchEntry> leaderboard;  ///< by pooled ROC-AUC, best first; ties by draw order
  const SearchEntry& best() const { return leaderboard.front(); }
};

/// Draws min(n_draws, grid size) distinct combinations uniformly; every draw
/// is evaluated with the same fold plan.
SearchResult random_search(const ModelSpec& base, const ParamGrid& grid, std::size_t n_draws,
                           const Matrix& X, std::span<const int> y, std::span<const std::string> groups,
                           std::size_t k, std::uint64_t seed, std::size_t threads = 0);

}  // namespace hdsig
