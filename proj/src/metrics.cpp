#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hdsig/error.hpp"
#include "hdsig/eval.hpp"

namespace hdsig {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b)
    fail(ErrorCode::LengthMismatch, "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

void check_binary(std::span<const int> v) {
  for (int x : v)
    if (x != 0 && x != 1) fail(ErrorCode::InvalidArgument, "labels must be 0 or 1");
}

// Validates inputs and returns (negatives, positives).
std::pair<std::size_t, std::size_t> check_scored(std::span<const int> y, std::span<const double> s) {
  check_lengths(y.size(), s.size());
  check_binary(y);
  std::size_t pos = 0;
  for (int v : y) pos += static_cast<std::size_t>(v);
  if (pos == 0 || pos == y.size()) fail(ErrorCode::OneClassOnly, "both classes must be present");
  for (double v : s)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "scores must be finite");
  return {y.size() - pos, pos};
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return idx;
}

// Cumulative (fp, tp) after each block of tied scores, highest score first.
struct Step {
  double threshold;
  double fp, tp;
};

std::vector<Step> threshold_steps(std::span<const int> y, std::span<const double> s) {
  const auto idx = order_by_score_desc(s);
  std::vector<Step> steps;
  double fp = 0.0, tp = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (y[idx[i]] ? tp : fp) += 1.0;
    if (i + 1 == idx.size() || s[idx[i + 1]] != s[idx[i]]) steps.push_back({s[idx[i]], fp, tp});
  }
  return steps;
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred) {
  check_lengths(y_true.size(), y_pred.size());
  check_binary(y_true);
  check_binary(y_pred);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i]) (y_pred[i] ? cm.tp : cm.fn) += 1;
    else (y_pred[i] ? cm.fp : cm.tn) += 1;
  }
  return cm;
}

BasicMetrics basic_metrics(const ConfusionMatrix& cm) {
  BasicMetrics m;
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  if (cm.total() > 0) m.accuracy = d(cm.tp + cm.tn) / d(cm.total());
  if (cm.tp + cm.fp > 0) m.precision = d(cm.tp) / d(cm.tp + cm.fp);
  else m.precision_degenerate = true;
  if (cm.tp + cm.fn > 0) m.recall = d(cm.tp) / d(cm.tp + cm.fn);
  else m.recall_degenerate = true;
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

BasicMetrics basic_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  return basic_metrics(confusion_matrix(y_true, y_pred));
}

double roc_auc(std::span<const int> y_true, std::span<const double> scores) {
  const auto [neg, pos] = check_scored(y_true, scores);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of positive ranks with midranks for ties (Mann-Whitney U).
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (y_true[idx[t]]) rank_sum += midrank;
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::vector<CurvePoint> roc_curve(std::span<const int> y_true, std::span<const double> scores) {
  const auto [neg, pos] = check_scored(y_true, scores);
  std::vector<CurvePoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  for (const auto& s : threshold_steps(y_true, scores))
    out.push_back({s.threshold, s.fp / static_cast<double>(neg), s.tp / static_cast<double>(pos)});
  return out;
}

std::vector<CurvePoint> pr_curve(std::span<const int> y_true, std::span<const double> scores) {
  const auto [neg, pos] = check_scored(y_true, scores);
  std::vector<CurvePoint> out;
  for (const auto& s : threshold_steps(y_true, scores))
    out.push_back({s.threshold, s.tp / static_cast<double>(pos), s.tp / (s.tp + s.fp)});
  return out;
}

double average_precision(std::span<const int> y_true, std::span<const double> scores) {
  double ap = 0.0, prev_recall = 0.0;
  for (const auto& p : pr_curve(y_true, scores)) {
    ap += (p.x - prev_recall) * p.y;
    prev_recall = p.x;
  }
  return ap;
}

std::vector<int> threshold_predictions(std::span<const double> scores, double threshold) {
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold ? 1 : 0;
  return out;
}

}  // namespace hdsig
