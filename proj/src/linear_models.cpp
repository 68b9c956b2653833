#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hdsig/error.hpp"
#include "hdsig/models.hpp"

namespace hdsig {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

ConstMap as_eigen(const Matrix& X) { return ConstMap(X.data().data(), X.rows(), X.cols()); }

struct Standardizer {
  std::vector<double> center, scale;
};

// Population mean/SD per column; constant columns get scale 1 and are
// mapped to exact zeros.
Standardizer fit_standardizer(const Matrix& X) {
  const std::size_t n = X.rows(), p = X.cols();
  Standardizer s;
  s.center.assign(p, 0.0);
  s.scale.assign(p, 1.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0, lo = X(0, j), hi = lo;
    for (std::size_t i = 0; i < n; ++i) {
      sum += X(i, j);
      lo = std::min(lo, X(i, j));
      hi = std::max(hi, X(i, j));
    }
    const double mean = sum / static_cast<double>(n);
    if (!(lo < hi)) {
      s.center[j] = lo;
      continue;
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (X(i, j) - mean) * (X(i, j) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.center[j] = mean;
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

RowMat standardize(const Matrix& X, const std::vector<double>& center, const std::vector<double>& scale) {
  RowMat Z(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j)
      Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (X(i, j) - center[j]) / scale[j];
  return Z;
}

Matrix to_matrix(const RowMat& Z) {
  return Matrix(static_cast<std::size_t>(Z.rows()), static_cast<std::size_t>(Z.cols()),
                std::vector<double>(Z.data(), Z.data() + Z.size()));
}

// log(1 + exp(-|z|)) + max(z, 0) - y z, stable for large |z|
double log_loss(double z, int y) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - (y ? z : 0.0);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double max_abs(std::span<const double> v, double extra) {
  double m = std::abs(extra);
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

void check_training_data(const Matrix& X, std::span<const int> y) {
  if (X.rows() != y.size())
    fail(ErrorCode::LengthMismatch, "X has " + std::to_string(X.rows()) + " rows but y has " +
                                        std::to_string(y.size()) + " labels");
  if (X.rows() < 2) fail(ErrorCode::TooFewRows, "need at least two training rows");
  if (X.cols() == 0) fail(ErrorCode::InvalidArgument, "need at least one feature");
  if (!X.all_finite()) fail(ErrorCode::NonFiniteInput, "training matrix has non-finite entries");
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) fail(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    (v ? has1 : has0) = true;
  }
  if (!has0 || !has1) fail(ErrorCode::SingleClass, "training labels contain a single class");
}

// ---------------------------------------------------------------------------
// Logistic regression

double logreg_objective(const Matrix& Z, std::span<const int> y, double l2, std::span<const double> w,
                        double b, std::span<double> grad_w, double* grad_b) {
  const std::size_t n = Z.rows(), p = Z.cols();
  const ConstMap Ze = as_eigen(Z);
  const Eigen::Map<const Eigen::VectorXd> we(w.data(), static_cast<Eigen::Index>(p));
  const Eigen::VectorXd z = (Ze * we).array() + b;
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  Eigen::VectorXd resid(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    loss += log_loss(z[ii], y[i]);
    resid[ii] = sigmoid(z[ii]) - y[i];
  }
  loss = loss * inv_n + 0.5 * l2 * inv_n * we.squaredNorm();
  if (!grad_w.empty()) {
    Eigen::Map<Eigen::VectorXd> g(grad_w.data(), static_cast<Eigen::Index>(p));
    g = (Ze.transpose() * resid) * inv_n + (l2 * inv_n) * we;
  }
  if (grad_b) *grad_b = resid.sum() * inv_n;
  return loss;
}

TrainedModel fit_logreg(const Matrix& X, std::span<const int> y, const LogRegParams& params) {
  check_training_data(X, y);
  if (!(params.l2 >= 0.0)) fail(ErrorCode::InvalidArgument, "l2 penalty must be non-negative");
  if (!(params.tol > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be positive");

  const std::size_t p = X.cols();
  const Standardizer st = fit_standardizer(X);
  const Matrix Z = to_matrix(standardize(X, st.center, st.scale));

  std::vector<double> w(p, 0.0), g(p), w_new(p), g_new(p);
  double b = 0.0, gb = 0.0, b_new = 0.0, gb_new = 0.0;
  double f = logreg_objective(Z, y, params.l2, w, b, g, &gb);
  double step = 1.0;

  LogRegModel m;
  m.params = params;
  std::size_t it = 0;
  for (; it < params.max_iter; ++it) {
    const double gnorm = max_abs(g, gb);
    if (gnorm < params.tol) {
      m.converged = true;
      break;
    }
    double gg = gb * gb;
    for (double v : g) gg += v * v;
    // Armijo backtracking from a Barzilai-Borwein trial step.
    double f_new = 0.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t j = 0; j < p; ++j) w_new[j] = w[j] - step * g[j];
      b_new = b - step * gb;
      f_new = logreg_objective(Z, y, params.l2, w_new, b_new, g_new, &gb_new);
      if (f_new <= f - 1e-4 * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent possible at machine precision
    double ss = (b_new - b) * (b_new - b), sy = (b_new - b) * (gb_new - gb);
    for (std::size_t j = 0; j < p; ++j) {
      const double dw = w_new[j] - w[j];
      ss += dw * dw;
      sy += dw * (g_new[j] - g[j]);
    }
    w.swap(w_new);
    g.swap(g_new);
    b = b_new;
    gb = gb_new;
    f = f_new;
    step = sy > 0.0 ? ss / sy : step * 2.0;
  }
  m.iterations = it;
  m.gradient_max_norm = max_abs(g, gb);
  if (!m.converged && m.gradient_max_norm < params.tol) m.converged = true;

  m.center = st.center;
  m.scale = st.scale;
  m.weights_std = w;
  m.intercept_std = b;
  m.weights.resize(p);
  m.intercept = b;
  for (std::size_t j = 0; j < p; ++j) {
    m.weights[j] = w[j] / st.scale[j];
    m.intercept -= m.weights[j] * st.center[j];
  }
  return {ModelKind::LogReg, p, std::move(m)};
}

// ---------------------------------------------------------------------------
// Gaussian discriminants

namespace {

struct Factored {
  std::vector<double> precision;
  double log_det = 0.0;
};

Factored shrink_and_invert(Eigen::MatrixXd S, double reg, const char* what) {
  const auto p = S.rows();
  const double mu = S.trace() / static_cast<double>(p);
  S = (1.0 - reg) * S;
  S.diagonal().array() += reg * mu;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) fail(ErrorCode::SingularCovariance, std::string(what) + ": eigensolver failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double hi = ev.maxCoeff(), lo = ev.minCoeff();
  if (!(hi > 0.0) || lo <= 1e-12 * hi) {
    fail(ErrorCode::SingularCovariance,
         std::string(what) + " is singular (eigenvalue range " + std::to_string(lo) + " .. " +
             std::to_string(hi) + "); increase the shrinkage");
  }
  const Eigen::MatrixXd& V = es.eigenvectors();
  const Eigen::MatrixXd P = V * ev.cwiseInverse().asDiagonal() * V.transpose();
  Factored f;
  f.precision.resize(static_cast<std::size_t>(p * p));
  Eigen::Map<RowMat>(f.precision.data(), p, p) = P;
  f.log_det = ev.array().log().sum();
  return f;
}

TrainedModel fit_gaussian(const Matrix& X, std::span<const int> y, double reg, bool quadratic) {
  check_training_data(X, y);
  if (!(reg >= 0.0 && reg <= 1.0)) fail(ErrorCode::InvalidArgument, "shrinkage must lie in [0, 1]");
  const std::size_t n = X.rows(), p = X.cols();
  std::size_t count[2] = {0, 0};
  for (int v : y) ++count[v];
  for (int c = 0; c < 2; ++c) {
    if (count[c] < 2)
      fail(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " has fewer than 2 samples");
  }

  const Standardizer st = fit_standardizer(X);
  const RowMat Z = standardize(X, st.center, st.scale);

  GaussianModel g;
  g.quadratic = quadratic;
  g.reg = reg;
  g.center = st.center;
  g.scale = st.scale;
  Eigen::MatrixXd scatter[2];
  for (int c = 0; c < 2; ++c) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (y[i] == c) idx.push_back(static_cast<Eigen::Index>(i));
    const RowMat Zc = Z(idx, Eigen::placeholders::all);
    const Eigen::RowVectorXd mean = Zc.colwise().mean();
    const RowMat D = Zc.rowwise() - mean;
    scatter[c] = D.transpose() * D;
    g.means[c].assign(mean.data(), mean.data() + p);
    g.log_prior[c] = std::log(static_cast<double>(count[c]) / static_cast<double>(n));
  }
  if (quadratic) {
    for (int c = 0; c < 2; ++c) {
      auto f = shrink_and_invert(scatter[c] / static_cast<double>(count[c] - 1), reg,
                                 c == 0 ? "class-0 covariance" : "class-1 covariance");
      g.precision[c] = std::move(f.precision);
      g.log_det[c] = f.log_det;
    }
  } else {
    if (n < 3) fail(ErrorCode::ClassTooSmall, "pooled covariance needs at least 3 samples");
    auto f = shrink_and_invert((scatter[0] + scatter[1]) / static_cast<double>(n - 2), reg,
                               "pooled covariance");
    g.precision[0] = f.precision;
    g.precision[1] = std::move(f.precision);
    g.log_det[0] = g.log_det[1] = f.log_det;
  }
  return {quadratic ? ModelKind::QDA : ModelKind::LDA, p, std::move(g)};
}

}  // namespace

TrainedModel fit_lda(const Matrix& X, std::span<const int> y, double reg) {
  return fit_gaussian(X, y, reg, false);
}

TrainedModel fit_qda(const Matrix& X, std::span<const int> y, double reg) {
  return fit_gaussian(X, y, reg, true);
}

// Used by predict_proba in models.cpp.
Matrix predict_linear_proba(const LogRegModel& m, const Matrix& X) {
  const ConstMap Xe = as_eigen(X);
  const Eigen::Map<const Eigen::VectorXd> w(m.weights.data(), static_cast<Eigen::Index>(m.weights.size()));
  const Eigen::VectorXd z = (Xe * w).array() + m.intercept;
  Matrix out(X.rows(), 2);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double p1 = sigmoid(z[static_cast<Eigen::Index>(i)]);
    out(i, 1) = p1;
    out(i, 0) = 1.0 - p1;
  }
  return out;
}

Matrix predict_gaussian_proba(const GaussianModel& g, const Matrix& X) {
  const auto p = static_cast<Eigen::Index>(g.center.size());
  const RowMat Z = standardize(X, g.center, g.scale);
  Eigen::VectorXd ll[2];
  for (int c = 0; c < 2; ++c) {
    const Eigen::Map<const Eigen::RowVectorXd> mu(g.means[c].data(), p);
    const Eigen::Map<const RowMat> P(g.precision[c].data(), p, p);
    const RowMat D = Z.rowwise() - mu;
    const Eigen::VectorXd q = (D * P).cwiseProduct(D).rowwise().sum();
    ll[c] = (-0.5 * q).array() + (g.log_prior[c] - 0.5 * g.log_det[c]);
  }
  Matrix out(X.rows(), 2);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double p1 = sigmoid(ll[1][ii] - ll[0][ii]);
    out(i, 1) = p1;
    out(i, 0) = 1.0 - p1;
  }
  return out;
}

}  // namespace hdsig
