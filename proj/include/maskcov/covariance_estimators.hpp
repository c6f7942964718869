#pragma once

#include "maskcov/common.hpp"
#include "maskcov/mask_estimation.hpp"

#include <string>
#include <variant>

namespace maskcov {

enum class EstimatorKind { oracle_B, oracle_A, a_star, b_star };

std::string to_string(EstimatorKind kind);

struct CovarianceEstimate {
  Matrix matrix;
  EstimatorKind kind = EstimatorKind::b_star;
  std::variant<MaskSummaries, MaskMatrixM> mask_used;
  // Entries whose denominator was zero while the numerator was not.
  Index degenerate_divisions = 0;
  // True when the normalizer itself is unusable (offd <= 0 for b_star).
  bool degenerate_run = false;
};

struct HadamardQuotient {
  Matrix value;
  Index degenerate = 0;
};

/// Entrywise numerator / denominator with 0/0 = 0. A zero denominator under a
/// nonzero numerator also yields 0 and is counted, never thrown.
HadamardQuotient hadamard_divide(const Matrix& numerator, const Matrix& denominator);
HadamardQuotient hadamard_divide(const Matrix& numerator, const MaskSummaries& denominator);

/// X X^T with the upper triangle mirrored from the lower one so the result is
/// exactly symmetric.
Matrix row_gram(const Matrix& x);
/// X^T X, exactly symmetric.
Matrix column_gram(const Matrix& x);

/// B_tilde = X X^T / M with the oracle two-valued M(a_diag, p).
CovarianceEstimate oracle_B_tilde(const Matrix& x_obs, const Vector& a_diag, const Vector& p);
/// Same estimator against any row-side normalizer (oracle or estimated).
CovarianceEstimate estimate_B(const Matrix& x_obs, const MaskSummaries& mask, EstimatorKind kind);

/// A_tilde = X^T X / N, N = trace_B * M(p).
CovarianceEstimate oracle_A_tilde(const Matrix& x_obs, double trace_B, const Vector& p);

/// A_star = (1/n) X^T X / M_hat.
CovarianceEstimate estimate_A_star(const Matrix& x_obs, const MaskMatrixM& m_hat);

/// B_star = X X^T / MM_hat. Its trace equals n whenever diag_value > 0.
CovarianceEstimate estimate_B_star(const Matrix& x_obs, const MaskSummaries& mm_hat);

/// Fully data-driven B_star: p_hat from the mask, then MM_hat, then the quotient.
CovarianceEstimate estimate_B_star_from_mask(const Matrix& x_obs, const Matrix& mask);

}  // namespace maskcov
