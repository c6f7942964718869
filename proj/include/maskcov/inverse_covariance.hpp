#pragma once

#include "maskcov/common.hpp"
#include "maskcov/mask_estimation.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace maskcov {

/// One nodewise regression: regress row j on the remaining rows using the
/// Gram surrogate. gamma_matrix may be indefinite.
struct NodewiseProblem {
  Matrix gamma_matrix;  // (n-1) x (n-1), B with row/col j removed
  Vector gamma_vector;  // column j of B without entry j
  Index j = 0;
};

struct LassoConfig {
  double lambda = 0.0;
  double b1 = 1.0;  // l1 radius
  int max_iters = 20000;
  double step_size = 0.0;  // 0 selects 1 / spectral radius of gamma_matrix
  bool backtracking = true;
  double tol = 1e-10;  // on the max-abs iterate change
  // Extra starting points tried when gamma_matrix is indefinite (the problem
  // is then nonconvex). Convex problems always use a single start at 0.
  int restarts = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LassoResult {
  Vector beta;
  double objective = 0.0;
  int iterations = 0;  // summed over starts
  bool converged = false;
  // best objective so far, one entry per iteration of the winning start
  std::vector<double> objective_trace;
};

struct RegressionTargets {
  Vector beta_star;  // -theta_jk / theta_jj, k != j
  double resid_var = 0.0;  // 1 / theta_jj
};

/// Population regression coefficients and residual variance from Theta0 = B0^-1.
RegressionTargets population_regression_targets(const Matrix& b0, Index j);

NodewiseProblem gram_parts(const Matrix& b_star, Index j);

/// Builds the same problem directly from the observed rows:
/// Gamma = X_{-j} X_{-j}^T / MM_{-j,-j},  gamma = X_{-j} X_j^T / MM_{-j,j}.
NodewiseProblem gram_parts_from_data(const Matrix& x_obs, const MaskSummaries& mm_hat, Index j);

Vector soft_threshold(const Vector& v, double threshold);

/// Euclidean projection onto { ||x||_1 <= r }.
Vector project_l1_ball(const Vector& v, double r);

/// 0.5 b^T G b - <g, b> + lambda ||b||_1
double lasso_objective(const NodewiseProblem& prob, const Vector& beta, double lambda);

/// Minimizes the l1-penalized quadratic over the l1 ball by projected
/// composite gradient steps (gradient step, soft-threshold, l1-ball
/// projection; the composition is the exact prox of penalty plus constraint).
/// Throws NumericalFailure on a non-finite objective.
LassoResult solve_constrained_lasso(const NodewiseProblem& prob, const LassoConfig& cfg);

/// b1 = M_omega * sqrt(2 d0_bar) * sqrt(max_j B_jj / min_j B_jj).
double compute_b1_radius(const Matrix& b_star, double m_omega, double d0_bar);

/// lambda = 4 C_gamma b_inf kappa_rho_tilde r_offd.
double compute_lambda(double b_inf_hat, double kappa_rho_tilde, double rate_underline_r_offd,
                      double c_gamma);

struct ThetaRow {
  double theta_jj = 0.0;
  Vector theta_row;  // length n-1, theta_{j,-j}
  bool degenerate = false;
};

/// theta_jj = (B_jj - B_{j,-j} beta)^-1, theta_{j,-j} = -theta_jj beta.
/// A non-positive pivot flags the row and uses pivot_floor for theta_jj.
ThetaRow assemble_theta_row(const Matrix& b_star, Index j, const Vector& beta_hat,
                            double pivot_floor = 1e-8);

enum class SymmetrizeMethod { exact_lp, average };

SymmetrizeMethod parse_symmetrize_method(const std::string& name);

struct SymmetrizeResult {
  Matrix theta;
  bool fell_back = false;  // LP hit its pivot cap, average used instead
};

/// argmin over symmetric S of ||S - theta_tilde||_inf (max abs row sum).
///
/// exact_lp solves the LP in a reduced form: S_ii = theta_ii, and each pair
/// i < j must absorb |theta_ij - theta_ji| in total between rows i and j; the
/// LP chooses the split minimizing the largest row load.
SymmetrizeResult symmetrize_theta(const Matrix& theta_tilde, SymmetrizeMethod method,
                                  int max_pivots = 200000);

/// Max absolute row sum, the matrix l_inf operator norm.
double matrix_linf_norm(const Matrix& m);

struct PrecisionConfig {
  LassoConfig lasso;
  SymmetrizeMethod sym_method = SymmetrizeMethod::exact_lp;
  double pivot_floor = 1e-8;
  int jobs = 1;
};

struct RowConvergence {
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
};

struct PrecisionEstimate {
  std::vector<Vector> beta_rows;
  Matrix theta_tilde;
  Matrix theta_hat;
  Vector diag_values;
  std::vector<RowConvergence> convergence;
  std::vector<Index> degenerate_rows;
  bool symmetrize_fell_back = false;
};

/// Nodewise pipeline: n constrained Lasso solves, row assembly, symmetrization.
PrecisionEstimate estimate_precision(const Matrix& b_star, const PrecisionConfig& cfg);

/// Same, starting from observed data (p_hat from the support of x_obs).
PrecisionEstimate estimate_precision_from_data(const Matrix& x_obs, const PrecisionConfig& cfg);

}  // namespace maskcov
