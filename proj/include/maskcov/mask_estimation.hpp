#pragma once

#include "maskcov/common.hpp"

namespace maskcov {

/// Two-valued n x n mask normalizer: diag_value on the diagonal, offd_value
/// elsewhere. Used for the oracle M and for its data-driven estimate.
struct MaskSummaries {
  double diag_value = 0.0;
  double offd_value = 0.0;
  Index n = 0;

  Matrix matrix() const;
  bool degenerate() const { return !(offd_value > 0.0) || !(diag_value > 0.0); }
};

/// m x m matrix with probs_i on the diagonal and probs_i * probs_j off it,
/// optionally scaled (the A-side oracle uses scale = tr(B0)). Stored through
/// its probability vector; matrix() materializes it.
struct MaskMatrixM {
  Vector probs;
  double scale = 1.0;

  Index size() const { return probs.size(); }
  Matrix matrix() const;
};

/// p_hat_j = (1/n) sum_k U[k][j].
Vector estimate_sampling_probs(const Matrix& mask);

/// Same, using the support 1{x_obs != 0} as the observation indicator.
Vector estimate_sampling_probs_from_support(const Matrix& x_obs);

MaskMatrixM build_M_hat(const Vector& probs);

/// Oracle summaries: diag = sum_j a_jj p_j, offd = sum_j a_jj p_j^2.
MaskSummaries oracle_mask_B(const Vector& a_diag, const Vector& p, Index n);

/// Oracle N = trace_B * M(p).
MaskMatrixM oracle_mask_A(double trace_B, const Vector& p);

/// Data-driven summaries from the observed matrix:
///   diag = tr(X^T X) / n
///   offd = tr(X^T X o M_hat) / (n - 1) - tr(X^T X) / (n (n - 1))
/// The trace of a Hadamard product only involves diagonals, so this is
/// evaluated in O(n m) from the column energies without forming X^T X.
/// Throws InsufficientRows when n < 2.
MaskSummaries estimate_MM_hat(const Matrix& x_obs, const MaskMatrixM& m_hat);

}  // namespace maskcov
