#pragma once

#include "maskcov/common.hpp"

#include <string>

namespace maskcov {

enum class ModelKind { ar1, star_block, custom };

/// Spectral and norm summaries of a symmetric matrix.
struct MatrixMetrics {
  double inf_norm = 0.0;              // max absolute row sum
  double op_norm = 0.0;               // largest singular value
  double entrywise_l1_over_op = 0.0;  // sum_ij |b_ij| / op_norm
  double inf_over_op = 0.0;
  double effective_rank = 0.0;  // trace / op_norm
  double cond = 0.0;            // op_norm / lambda_min, +inf when not PD
  double diag_max = 0.0;
  double diag_min = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

MatrixMetrics matrix_metrics(const Matrix& b);

/// A symmetric positive-definite covariance with cached metrics.
///
/// Construction validates symmetry (1e-12 relative), positive diagonal and
/// positive eigenvalues (lambda_min > 1e-10 * lambda_max). Instances are
/// immutable.
class CovarianceModel {
 public:
  static CovarianceModel ar1(Index n, double rho);
  static CovarianceModel star_block(Index n, Index num_blocks, double rho);
  static CovarianceModel custom(Matrix matrix);

  const Matrix& matrix() const { return matrix_; }
  Index n() const { return matrix_.rows(); }
  ModelKind kind() const { return kind_; }
  double rho() const { return rho_; }
  Index num_blocks() const { return num_blocks_; }
  const MatrixMetrics& metrics() const { return metrics_; }
  double trace() const { return matrix_.trace(); }

  // Short identifier, e.g. "ar1:0.7" or "star:1:0.125".
  std::string id() const;

 private:
  CovarianceModel(Matrix matrix, ModelKind kind, double rho, Index num_blocks);

  Matrix matrix_;
  ModelKind kind_;
  double rho_;
  Index num_blocks_;
  MatrixMetrics metrics_;
};

inline CovarianceModel ar1_covariance(Index n, double rho) {
  return CovarianceModel::ar1(n, rho);
}

inline CovarianceModel star_block_covariance(Index n, Index num_blocks, double rho) {
  return CovarianceModel::star_block(n, num_blocks, rho);
}

/// Unique symmetric positive-definite square root via eigendecomposition.
/// Throws NotPositiveDefinite when lambda_min <= 1e-10 * lambda_max.
Matrix symmetric_sqrt(const Matrix& s);

/// Rescales to n * B / trace(B).
CovarianceModel normalize_trace(const CovarianceModel& b);
Matrix normalize_trace(const Matrix& b);

// Largest eigenvalue of the n x n AR(1) matrix without forming it. Uses the
// Kac-Murdock-Szego characterization: lambda = (1 - r^2) / (1 - 2 r cos t + r^2)
// with t the smallest root of sin((n+1)t) - 2r sin(nt) + r^2 sin((n-1)t).
double ar1_operator_norm(Index n, double rho);

// Max absolute row sum.
double inf_norm(const Matrix& b);

// Largest absolute eigenvalue of the symmetric part of b.
double symmetric_operator_norm(const Matrix& b);

bool is_symmetric(const Matrix& b, double rel_tol = 1e-12);

}  // namespace maskcov
