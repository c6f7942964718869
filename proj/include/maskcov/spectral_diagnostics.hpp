#pragma once

#include "maskcov/common.hpp"
#include "maskcov/data_synthesis.hpp"

#include <cstdint>
#include <vector>

namespace maskcov {

enum class SparseEigenMode { exact, greedy };

constexpr std::uint64_t kDefaultEnumerationCap = 2'000'000;

/// Largest eigenvalue over all s0 x s0 principal submatrices.
///
/// exact enumerates every subset and throws CapExceeded when C(n, s0) exceeds
/// the cap; greedy runs a local swap search from several seeds and returns a
/// lower bound on the exact value.
double sparse_max_eigenvalue(const Matrix& m, Index s0, SparseEigenMode mode = SparseEigenMode::exact,
                             std::uint64_t enumeration_cap = kDefaultEnumerationCap);

/// rho_max(s0, |B|) / ||B||_2.
double psi_B(const Matrix& b, Index s0, SparseEigenMode mode = SparseEigenMode::exact,
             std::uint64_t enumeration_cap = kDefaultEnumerationCap);

std::uint64_t binomial_coefficient(Index n, Index k);

struct RateBundle {
  double r_offd_s0 = 0.0;
  double r_diag = 0.0;
  double underline_r_offd = 0.0;
  double x_rescale = 0.0;
  double epsilon_net = 0.25;
  Index s0 = 1;
};

/// Rate functions of the effective sample sizes sum a_jj p_j and sum a_jj p_j^2.
/// Logarithms are natural.
RateBundle compute_rates(const Vector& a_diag, const Vector& p, double a_op_norm, double a_inf,
                         double a_min, Index n, Index m, Index s0, double epsilon = 0.25);

/// Streams test vectors for restricted quadratic forms: first every standard
/// basis vector, then alternating exact s0-sparse unit vectors and dense unit
/// vectors pulled into sqrt(s0) B_1 by soft-thresholding heavy-tailed
/// (Dirichlet-magnitude) draws. Every vector has unit l2 norm and l1 norm at
/// most sqrt(s0).
class ConeSampler {
 public:
  ConeSampler(Index n, Index s0, Rng& rng);
  Vector next();

 private:
  Vector sparse_draw();
  Vector dense_draw();

  Index n_;
  Index s0_;
  Rng& rng_;
  Index emitted_ = 0;
};

struct REReport {
  double alpha_target = 0.0;  // 5/8 lambda_min
  double tau_target = 0.0;    // 3 lambda_min / (8 s0)
  Index num_samples = 0;
  double fraction_lower_ok = 0.0;
  double fraction_upper_ok = 0.0;
  // Largest shortfall over both inequalities; 0 when everything held.
  double worst_violation = 0.0;
};

/// Checks, on sampled vectors q, the lower and upper RE inequalities
///   q'Gq >= (5/8) lmin |q|_2^2 - (3 lmin / (8 s0)) |q|_1^2
///   q'Gq <= (lmax + (3/8) lmin) |q|_2^2 + (3 lmin / (8 s0)) |q|_1^2
REReport check_re_conditions(const Matrix& g, double lambda_min_B0, double lambda_max_B0, Index s0,
                             Index num_samples, Rng& rng);

/// Sampled lower bound on sup |q' Delta q| over sqrt(s0) B_1 intersect B_2.
double quadratic_form_deviation(const Matrix& delta, Index s0, Index num_samples, Rng& rng);

/// ||B_hat - B0||_2 / ||B0||_2 on symmetric parts.
double operator_norm_error(const Matrix& b_hat, const Matrix& b0);

struct TailRow {
  double threshold = 0.0;
  double empirical = 0.0;  // fraction of replicates with |S| > threshold
  double bound = 0.0;      // exp(-c min(t^2 / V, t / D))
};

struct TailCheckResult {
  std::vector<TailRow> rows;
  double variance_proxy = 0.0;  // V = a_inf ||B||_2 ||(|b_ij|)||_2 sum a_kk p_k^2
  double scale_proxy = 0.0;     // D = a_inf ||B||_2
  double sample_std = 0.0;
  bool passed = false;
};

/// Simulates the centered Bernoulli quadratic form
///   S(q, h) = sum_k sum_{i != j} a_kk b_ij (q_i h_j + q_j h_i) / 2 (u_ik u_jk - p_k^2)
/// over fresh masks and compares exceedance frequencies with the sub-gamma
/// style bound.
TailCheckResult empirical_tail_check(const Vector& a_diag, const Vector& p, const Matrix& b,
                                     const Vector& q, const Vector& h, Index num_replicates,
                                     const std::vector<double>& thresholds, Rng& rng,
                                     double c = 0.01);

}  // namespace maskcov
