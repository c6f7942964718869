#include "maskcov/covariance_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace maskcov {
namespace {

constexpr double kPdRelTol = 1e-10;

std::string format_param(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

bool is_symmetric(const Matrix& b, double rel_tol) {
  if (b.rows() != b.cols()) return false;
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (b - b.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

double inf_norm(const Matrix& b) { return b.cwiseAbs().rowwise().sum().maxCoeff(); }

double symmetric_operator_norm(const Matrix& b) {
  require_shape(b.rows() == b.cols(), "operator norm needs a square matrix");
  if (b.size() == 0) return 0.0;
  const Matrix sym = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(sym.rows() - 1)));
}

MatrixMetrics matrix_metrics(const Matrix& b) {
  require_shape(b.rows() == b.cols() && b.rows() > 0, "matrix_metrics needs a non-empty square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (b + b.transpose()), Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  MatrixMetrics m;
  m.lambda_min = ev(0);
  m.lambda_max = ev(ev.size() - 1);
  m.op_norm = std::max(std::abs(m.lambda_min), std::abs(m.lambda_max));
  m.inf_norm = inf_norm(b);
  m.entrywise_l1_over_op = b.cwiseAbs().sum() / m.op_norm;
  m.inf_over_op = m.inf_norm / m.op_norm;
  m.effective_rank = b.trace() / m.op_norm;
  m.cond = m.lambda_min > 0 ? m.op_norm / m.lambda_min : std::numeric_limits<double>::infinity();
  m.diag_max = b.diagonal().maxCoeff();
  m.diag_min = b.diagonal().minCoeff();
  return m;
}

CovarianceModel::CovarianceModel(Matrix matrix, ModelKind kind, double rho, Index num_blocks)
    : matrix_(std::move(matrix)), kind_(kind), rho_(rho), num_blocks_(num_blocks) {
  require_shape(matrix_.rows() == matrix_.cols() && matrix_.rows() > 0,
                "covariance must be a non-empty square matrix");
  if (!is_symmetric(matrix_)) throw InvalidParameter("covariance matrix is not symmetric");
  if (matrix_.diagonal().minCoeff() <= 0.0)
    throw NotPositiveDefinite("covariance has a non-positive diagonal entry");
  metrics_ = matrix_metrics(matrix_);
  if (metrics_.lambda_min <= kPdRelTol * metrics_.lambda_max)
    throw NotPositiveDefinite("covariance is not positive definite");
}

CovarianceModel CovarianceModel::ar1(Index n, double rho) {
  require(n >= 1, "ar1: n must be >= 1");
  require(std::abs(rho) < 1.0, "ar1: |rho| must be < 1");
  Matrix s(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return CovarianceModel(std::move(s), ModelKind::ar1, rho, 1);
}

CovarianceModel CovarianceModel::star_block(Index n, Index num_blocks, double rho) {
  require(n >= 1 && num_blocks >= 1, "star_block: n and num_blocks must be >= 1");
  require(n % num_blocks == 0, "star_block: num_blocks must divide n");
  require(rho > 0.0 && rho < 1.0, "star_block: rho must lie in (0, 1)");
  const Index size = n / num_blocks;
  Matrix s = Matrix::Zero(n, n);
  for (Index blk = 0; blk < num_blocks; ++blk) {
    const Index hub = blk * size;
    for (Index i = hub; i < hub + size; ++i) {
      for (Index j = hub; j < hub + size; ++j) {
        if (i == j)
          s(i, j) = 1.0;
        else if (i == hub || j == hub)
          s(i, j) = rho;
        else
          s(i, j) = rho * rho;
      }
    }
  }
  return CovarianceModel(std::move(s), ModelKind::star_block, rho, num_blocks);
}

CovarianceModel CovarianceModel::custom(Matrix matrix) {
  return CovarianceModel(std::move(matrix), ModelKind::custom, 0.0, 1);
}

std::string CovarianceModel::id() const {
  switch (kind_) {
    case ModelKind::ar1:
      return "ar1:" + format_param(rho_);
    case ModelKind::star_block:
      return "star:" + std::to_string(num_blocks_) + ":" + format_param(rho_);
    case ModelKind::custom:
      break;
  }
  return "custom";
}

Matrix symmetric_sqrt(const Matrix& s) {
  require_shape(s.rows() == s.cols(), "symmetric_sqrt needs a square matrix");
  if (!is_symmetric(s, 1e-10)) throw InvalidParameter("symmetric_sqrt: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
  const Vector& ev = es.eigenvalues();
  if (ev.size() == 0) return s;
  if (ev(0) <= kPdRelTol * ev(ev.size() - 1) || ev(ev.size() - 1) <= 0.0)
    throw NotPositiveDefinite("symmetric_sqrt: matrix is not positive definite");
  const Matrix& v = es.eigenvectors();
  Matrix r = v * ev.cwiseSqrt().asDiagonal() * v.transpose();
  return 0.5 * (r + r.transpose());
}

Matrix normalize_trace(const Matrix& b) {
  const double tr = b.trace();
  require(tr > 0.0, "normalize_trace: trace must be positive");
  return (static_cast<double>(b.rows()) / tr) * b;
}

CovarianceModel normalize_trace(const CovarianceModel& b) {
  const double tr = b.trace();
  if (tr == static_cast<double>(b.n())) return b;
  return CovarianceModel::custom(normalize_trace(b.matrix()));
}

double ar1_operator_norm(Index n, double rho) {
  require(n >= 1, "ar1_operator_norm: n must be >= 1");
  require(std::abs(rho) < 1.0, "ar1_operator_norm: |rho| must be < 1");
  // The spectrum of AR(1) with -rho is that of rho (similarity by alternating signs).
  const double r = std::abs(rho);
  if (n == 1 || r == 0.0) return 1.0;
  const double dn = static_cast<double>(n);
  auto f = [&](double t) {
    return std::sin((dn + 1.0) * t) - 2.0 * r * std::sin(dn * t) + r * r * std::sin((dn - 1.0) * t);
  };
  // f > 0 just above 0 and f(pi/(n+1)) < 0 for 0 < r < 1.
  double lo = 0.0;
  double hi = M_PI / (dn + 1.0);
  for (int it = 0; it < 200 && hi - lo > 1e-300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  return (1.0 - r * r) / (1.0 - 2.0 * r * std::cos(t) + r * r);
}

}  // namespace maskcov
