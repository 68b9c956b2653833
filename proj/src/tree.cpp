#include <algorithm>
#include <cmath>
#include <numeric>

#include "hdsig/error.hpp"
#include "hdsig/models.hpp"
#include "hdsig/rng.hpp"

namespace hdsig {

namespace {

// n * gini(n0, n1)
double weighted_gini(double c0, double c1) {
  const double n = c0 + c1;
  return n > 0.0 ? n - (c0 * c0 + c1 * c1) / n : 0.0;
}

struct Split {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double child_impurity = 0.0;
};

bool better(const Split& cand, const Split& best) {
  if (best.feature < 0) return true;
  if (cand.child_impurity != best.child_impurity) return cand.child_impurity < best.child_impurity;
  if (cand.feature != best.feature) return cand.feature < best.feature;
  return cand.threshold < best.threshold;
}

class Builder {
 public:
  Builder(const Matrix& X, std::span<const int> y, const TreeParams& p, std::uint64_t seed)
      : X_(X), y_(y), params_(p), rng_(seed), order_(X.cols()) {}

  Tree build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    tree_.gini_decrease.assign(X_.cols(), 0.0);
    struct Work {
      std::int32_t node;
      std::size_t begin, end, depth;
    };
    std::vector<Work> stack;
    tree_.nodes.emplace_back();
    stack.push_back({0, 0, rows_.size(), 0});
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      double c0 = 0.0, c1 = 0.0;
      for (std::size_t i = w.begin; i < w.end; ++i) (y_[rows_[i]] ? c1 : c0) += 1.0;
      tree_.nodes[w.node].count0 = c0;
      tree_.nodes[w.node].count1 = c1;

      const std::size_t n = w.end - w.begin;
      const bool depth_cap = params_.max_depth > 0 && w.depth >= params_.max_depth;
      if (c0 == 0.0 || c1 == 0.0 || depth_cap || n < 2 * params_.min_samples_leaf) continue;

      const Split s = find_split(w.begin, w.end);
      if (s.feature < 0) continue;

      const auto f = static_cast<std::size_t>(s.feature);
      auto mid = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                rows_.begin() + static_cast<std::ptrdiff_t>(w.end),
                                [&](std::size_t r) { return X_(r, f) <= s.threshold; });
      const auto split_at = static_cast<std::size_t>(mid - rows_.begin());
      tree_.gini_decrease[f] += weighted_gini(c0, c1) - s.child_impurity;

      const auto left = static_cast<std::int32_t>(tree_.nodes.size());
      tree_.nodes.emplace_back();
      tree_.nodes.emplace_back();
      TreeNode& node = tree_.nodes[w.node];
      node.feature = s.feature;
      node.threshold = s.threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, split_at, w.end, w.depth + 1});
      stack.push_back({left, w.begin, split_at, w.depth + 1});
    }
    return std::move(tree_);
  }

 private:
  Split find_split(std::size_t begin, std::size_t end) {
    const std::size_t p = X_.cols();
    const std::size_t want = params_.candidates(p);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Split best;
    std::size_t found = 0;
    for (std::size_t i = 0; i < p && found < want; ++i) {
      std::swap(order_[i], order_[i + rng_.below(p - i)]);
      const std::size_t f = order_[i];
      double lo = X_(rows_[begin], f), hi = lo;
      for (std::size_t r = begin + 1; r < end; ++r) {
        const double v = X_(rows_[r], f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(lo < hi)) continue;  // constant in this node; does not count as a candidate
      ++found;
      const Split s = params_.mode == ForestMode::RandomForest ? best_cut(f, begin, end)
                                                               : random_cut(f, begin, end, lo, hi);
      if (s.feature >= 0 && better(s, best)) best = s;
    }
    return best;
  }

  Split best_cut(std::size_t f, std::size_t begin, std::size_t end) {
    vals_.clear();
    double t0 = 0.0, t1 = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t r = rows_[i];
      vals_.emplace_back(X_(r, f), y_[r]);
      (y_[r] ? t1 : t0) += 1.0;
    }
    std::sort(vals_.begin(), vals_.end());
    const std::size_t n = vals_.size();
    const std::size_t leaf = params_.min_samples_leaf;
    Split best;
    double l0 = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      (vals_[i].second ? l1 : l0) += 1.0;
      if (!(vals_[i].first < vals_[i + 1].first)) continue;
      if (i + 1 < leaf || n - i - 1 < leaf) continue;
      const double imp = weighted_gini(l0, l1) + weighted_gini(t0 - l0, t1 - l1);
      if (best.feature < 0 || imp < best.child_impurity) {
        double thr = 0.5 * (vals_[i].first + vals_[i + 1].first);
        if (!(thr < vals_[i + 1].first)) thr = vals_[i].first;
        best = {static_cast<std::int32_t>(f), thr, imp};
      }
    }
    return best;
  }

  Split random_cut(std::size_t f, std::size_t begin, std::size_t end, double lo, double hi) {
    double thr = lo + rng_.uniform() * (hi - lo);
    if (!(thr < hi)) thr = lo;
    double l0 = 0.0, l1 = 0.0, r0 = 0.0, r1 = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t r = rows_[i];
      const bool left = X_(r, f) <= thr;
      if (y_[r]) (left ? l1 : r1) += 1.0;
      else (left ? l0 : r0) += 1.0;
    }
    const double leaf = static_cast<double>(params_.min_samples_leaf);
    if (l0 + l1 < leaf || r0 + r1 < leaf) return {};
    return {static_cast<std::int32_t>(f), thr, weighted_gini(l0, l1) + weighted_gini(r0, r1)};
  }

  const Matrix& X_;
  std::span<const int> y_;
  const TreeParams& params_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<double, int>> vals_;
  Tree tree_;
};

}  // namespace

double Tree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  const TreeNode& leaf = nodes[i];
  return leaf.count1 / (leaf.count0 + leaf.count1);
}

Tree fit_tree(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
              const TreeParams& params, std::uint64_t seed) {
  if (rows.empty()) fail(ErrorCode::InvalidArgument, "cannot grow a tree on zero rows");
  Builder b(X, y, params, seed);
  return b.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = rng.below(n);
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace hdsig
