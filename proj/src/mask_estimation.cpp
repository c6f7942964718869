#include "maskcov/mask_estimation.hpp"

namespace maskcov {
namespace {

void check_probs(const Vector& p, const char* who) {
  for (Index j = 0; j < p.size(); ++j)
    if (!(p(j) >= 0.0 && p(j) <= 1.0))
      throw InvalidParameter(std::string(who) + ": probabilities must lie in [0, 1]");
}

}  // namespace

Matrix MaskSummaries::matrix() const {
  Matrix out = Matrix::Constant(n, n, offd_value);
  out.diagonal().setConstant(diag_value);
  return out;
}

Matrix MaskMatrixM::matrix() const {
  Matrix out = probs * probs.transpose();
  out.diagonal() = probs;
  return scale * out;
}

Vector estimate_sampling_probs(const Matrix& mask) {
  require_shape(mask.rows() >= 1, "estimate_sampling_probs: empty mask");
  for (Index k = 0; k < mask.size(); ++k) {
    const double v = mask.data()[k];
    if (v != 0.0 && v != 1.0) throw InvalidParameter("estimate_sampling_probs: mask must be binary");
  }
  return mask.colwise().mean().transpose();
}

Vector estimate_sampling_probs_from_support(const Matrix& x_obs) {
  require_shape(x_obs.rows() >= 1, "estimate_sampling_probs_from_support: empty data");
  return (x_obs.array() != 0.0).cast<double>().colwise().mean().transpose();
}

MaskMatrixM build_M_hat(const Vector& probs) {
  check_probs(probs, "build_M_hat");
  return MaskMatrixM{probs, 1.0};
}

MaskSummaries oracle_mask_B(const Vector& a_diag, const Vector& p, Index n) {
  require_shape(a_diag.size() == p.size(), "oracle_mask_B: length mismatch");
  require(n >= 1, "oracle_mask_B: n must be >= 1");
  check_probs(p, "oracle_mask_B");
  require((a_diag.array() > 0.0).all(), "oracle_mask_B: a_diag must be positive");
  MaskSummaries s;
  s.diag_value = a_diag.dot(p);
  s.offd_value = a_diag.dot(p.cwiseProduct(p));
  s.n = n;
  return s;
}

MaskMatrixM oracle_mask_A(double trace_B, const Vector& p) {
  require(trace_B > 0.0, "oracle_mask_A: trace_B must be positive");
  check_probs(p, "oracle_mask_A");
  return MaskMatrixM{p, trace_B};
}

MaskSummaries estimate_MM_hat(const Matrix& x_obs, const MaskMatrixM& m_hat) {
  const Index n = x_obs.rows();
  if (n < 2) throw InsufficientRows("estimate_MM_hat: needs at least two rows");
  require_shape(m_hat.size() == x_obs.cols(), "estimate_MM_hat: M_hat size must equal the column count");
  // diag(X^T X)_i = squared norm of column i.
  const Vector energy = x_obs.colwise().squaredNorm().transpose();
  const double total = energy.sum();
  const double weighted = m_hat.scale * energy.dot(m_hat.probs);
  const double dn = static_cast<double>(n);
  MaskSummaries s;
  s.diag_value = total / dn;
  s.offd_value = weighted / (dn - 1.0) - total / (dn * (dn - 1.0));
  s.n = n;
  return s;
}

}  // namespace maskcov
