#include "maskcov/covariance_estimators.hpp"

namespace maskcov {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::oracle_B:
      return "oracle_B_tilde";
    case EstimatorKind::oracle_A:
      return "oracle_A_tilde";
    case EstimatorKind::a_star:
      return "a_star";
    case EstimatorKind::b_star:
      return "b_star";
  }
  return "b_star";
}

HadamardQuotient hadamard_divide(const Matrix& numerator, const Matrix& denominator) {
  require_shape(numerator.rows() == denominator.rows() && numerator.cols() == denominator.cols(),
                "hadamard_divide: shape mismatch");
  HadamardQuotient q;
  q.value.resize(numerator.rows(), numerator.cols());
  for (Index k = 0; k < numerator.size(); ++k) {
    const double num = numerator.data()[k];
    const double den = denominator.data()[k];
    if (den == 0.0) {
      q.value.data()[k] = 0.0;
      if (num != 0.0) ++q.degenerate;
    } else {
      q.value.data()[k] = num / den;
    }
  }
  return q;
}

HadamardQuotient hadamard_divide(const Matrix& numerator, const MaskSummaries& denominator) {
  require_shape(numerator.rows() == numerator.cols() && numerator.rows() == denominator.n,
                "hadamard_divide: numerator must be n x n for the mask summaries");
  const Index n = numerator.rows();
  HadamardQuotient q;
  q.value.resize(n, n);
  auto divide = [&q](double num, double den) -> double {
    if (den == 0.0) {
      if (num != 0.0) ++q.degenerate;
      return 0.0;
    }
    return num / den;
  };
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      q.value(i, j) =
          divide(numerator(i, j), i == j ? denominator.diag_value : denominator.offd_value);
  return q;
}

Matrix row_gram(const Matrix& x) {
  Matrix g = Matrix::Zero(x.rows(), x.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(x);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

Matrix column_gram(const Matrix& x) {
  Matrix g = Matrix::Zero(x.cols(), x.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

CovarianceEstimate estimate_B(const Matrix& x_obs, const MaskSummaries& mask, EstimatorKind kind) {
  require_shape(mask.n == x_obs.rows(), "estimate_B: mask summaries size must equal the row count");
  HadamardQuotient q = hadamard_divide(row_gram(x_obs), mask);
  CovarianceEstimate est;
  est.matrix = std::move(q.value);
  est.kind = kind;
  est.mask_used = mask;
  est.degenerate_divisions = q.degenerate;
  est.degenerate_run = mask.degenerate() || q.degenerate > 0;
  return est;
}

CovarianceEstimate oracle_B_tilde(const Matrix& x_obs, const Vector& a_diag, const Vector& p) {
  require_shape(a_diag.size() == x_obs.cols() && p.size() == x_obs.cols(),
                "oracle_B_tilde: a_diag and p must have one entry per column");
  return estimate_B(x_obs, oracle_mask_B(a_diag, p, x_obs.rows()), EstimatorKind::oracle_B);
}

CovarianceEstimate oracle_A_tilde(const Matrix& x_obs, double trace_B, const Vector& p) {
  require_shape(p.size() == x_obs.cols(), "oracle_A_tilde: p must have one entry per column");
  const MaskMatrixM n_mask = oracle_mask_A(trace_B, p);
  HadamardQuotient q = hadamard_divide(column_gram(x_obs), n_mask.matrix());
  CovarianceEstimate est;
  est.matrix = std::move(q.value);
  est.kind = EstimatorKind::oracle_A;
  est.mask_used = n_mask;
  est.degenerate_divisions = q.degenerate;
  est.degenerate_run = q.degenerate > 0;
  return est;
}

CovarianceEstimate estimate_A_star(const Matrix& x_obs, const MaskMatrixM& m_hat) {
  require_shape(m_hat.size() == x_obs.cols(), "estimate_A_star: M_hat size must equal the column count");
  const double inv_n = 1.0 / static_cast<double>(x_obs.rows());
  HadamardQuotient q = hadamard_divide(inv_n * column_gram(x_obs), m_hat.matrix());
  CovarianceEstimate est;
  est.matrix = std::move(q.value);
  est.kind = EstimatorKind::a_star;
  est.mask_used = m_hat;
  est.degenerate_divisions = q.degenerate;
  est.degenerate_run = q.degenerate > 0;
  return est;
}

CovarianceEstimate estimate_B_star(const Matrix& x_obs, const MaskSummaries& mm_hat) {
  return estimate_B(x_obs, mm_hat, EstimatorKind::b_star);
}

CovarianceEstimate estimate_B_star_from_mask(const Matrix& x_obs, const Matrix& mask) {
  require_shape(mask.rows() == x_obs.rows() && mask.cols() == x_obs.cols(),
                "estimate_B_star_from_mask: shape mismatch");
  const MaskMatrixM m_hat = build_M_hat(estimate_sampling_probs(mask));
  return estimate_B_star(x_obs, estimate_MM_hat(x_obs, m_hat));
}

}  // namespace maskcov
