#include "maskcov/inverse_covariance.hpp"

#include "maskcov/covariance_estimators.hpp"
#include "maskcov/data_synthesis.hpp"
#include "maskcov/lp.hpp"
#include "maskcov/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

namespace maskcov {
namespace {

// Copies v without entry j.
Vector drop_entry(const Eigen::Ref<const Vector>& v, Index j) {
  const Index n = v.size();
  Vector out(n - 1);
  out.head(j) = v.head(j);
  out.tail(n - 1 - j) = v.tail(n - 1 - j);
  return out;
}

Matrix drop_row_col(const Matrix& b, Index j) {
  const Index n = b.rows();
  const Index tail = n - 1 - j;
  Matrix out(n - 1, n - 1);
  out.topLeftCorner(j, j) = b.topLeftCorner(j, j);
  out.topRightCorner(j, tail) = b.topRightCorner(j, tail);
  out.bottomLeftCorner(tail, j) = b.bottomLeftCorner(tail, j);
  out.bottomRightCorner(tail, tail) = b.bottomRightCorner(tail, tail);
  return out;
}

Matrix drop_row(const Matrix& x, Index j) {
  const Index n = x.rows();
  Matrix out(n - 1, x.cols());
  out.topRows(j) = x.topRows(j);
  out.bottomRows(n - 1 - j) = x.bottomRows(n - 1 - j);
  return out;
}

struct StartResult {
  Vector beta;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

StartResult run_from(const NodewiseProblem& prob, const LassoConfig& cfg, const Vector& start,
                     double base_step) {
  StartResult res;
  Vector beta = project_l1_ball(start, cfg.b1);
  double obj = lasso_objective(prob, beta, cfg.lambda);
  if (!std::isfinite(obj)) throw NumericalFailure("constrained lasso: non-finite objective at start");
  res.beta = beta;
  res.objective = obj;
  double step = base_step;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Vector grad = prob.gamma_matrix * beta - prob.gamma_vector;
    Vector next;
    Vector delta;
    double trial = cfg.backtracking ? std::min(2.0 * step, 1e6 * base_step) : step;
    for (;;) {
      next = project_l1_ball(soft_threshold(beta - trial * grad, trial * cfg.lambda), cfg.b1);
      delta = next - beta;
      if (!cfg.backtracking || trial <= base_step) break;
      const double curvature = delta.dot(prob.gamma_matrix * delta);
      if (curvature <= delta.squaredNorm() / trial) break;
      trial = std::max(0.5 * trial, base_step);
    }
    step = trial;
    beta = std::move(next);
    obj = lasso_objective(prob, beta, cfg.lambda);
    ++res.iterations;
    if (!std::isfinite(obj)) {
      throw NumericalFailure("constrained lasso: non-finite objective at iteration " +
                             std::to_string(res.iterations) + " (row " + std::to_string(prob.j) + ")");
    }
    if (obj < res.objective) {
      res.objective = obj;
      res.beta = beta;
    }
    res.trace.push_back(res.objective);
    if (delta.lpNorm<Eigen::Infinity>() < cfg.tol) {
      // Near the optimum the objective is flat to rounding, so prefer the
      // converged iterate over an earlier one that only ties it.
      if (obj <= res.objective + 1e-12 * (1.0 + std::abs(res.objective))) {
        res.objective = obj;
        res.beta = beta;
      }
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace

void LassoConfig::validate() const {
  require(lambda >= 0.0, "LassoConfig: lambda must be >= 0");
  require(b1 > 0.0, "LassoConfig: b1 must be > 0");
  require(max_iters >= 1, "LassoConfig: max_iters must be >= 1");
  require(tol > 0.0, "LassoConfig: tol must be > 0");
  require(step_size >= 0.0, "LassoConfig: step_size must be >= 0");
  require(restarts >= 0, "LassoConfig: restarts must be >= 0");
}

RegressionTargets population_regression_targets(const Matrix& b0, Index j) {
  require_shape(b0.rows() == b0.cols(), "population_regression_targets: B0 must be square");
  require(j >= 0 && j < b0.rows(), "population_regression_targets: index out of range");
  Eigen::LDLT<Matrix> ldlt(b0);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff())
    throw NotPositiveDefinite("population_regression_targets: B0 is singular or not PD");
  const Matrix theta = ldlt.solve(Matrix::Identity(b0.rows(), b0.cols()));
  const double tjj = theta(j, j);
  RegressionTargets out;
  out.beta_star = -drop_entry(theta.row(j).transpose(), j) / tjj;
  out.resid_var = 1.0 / tjj;
  return out;
}

NodewiseProblem gram_parts(const Matrix& b_star, Index j) {
  require_shape(b_star.rows() == b_star.cols(), "gram_parts: matrix must be square");
  require(j >= 0 && j < b_star.rows(), "gram_parts: index out of range");
  NodewiseProblem prob;
  prob.gamma_matrix = drop_row_col(b_star, j);
  prob.gamma_vector = drop_entry(b_star.col(j), j);
  prob.j = j;
  return prob;
}

NodewiseProblem gram_parts_from_data(const Matrix& x_obs, const MaskSummaries& mm_hat, Index j) {
  require_shape(mm_hat.n == x_obs.rows(), "gram_parts_from_data: summaries size must equal the row count");
  require(j >= 0 && j < x_obs.rows(), "gram_parts_from_data: index out of range");
  const Matrix rest = drop_row(x_obs, j);
  MaskSummaries sub = mm_hat;
  sub.n = rest.rows();
  NodewiseProblem prob;
  prob.gamma_matrix = hadamard_divide(row_gram(rest), sub).value;
  const Vector cross = rest * x_obs.row(j).transpose();
  prob.gamma_vector = mm_hat.offd_value == 0.0 ? Vector::Zero(cross.size()).eval()
                                               : (cross / mm_hat.offd_value).eval();
  prob.j = j;
  return prob;
}

Vector soft_threshold(const Vector& v, double threshold) {
  return v.unaryExpr([threshold](double x) {
    const double a = std::abs(x) - threshold;
    return a > 0.0 ? std::copysign(a, x) : 0.0;
  });
}

Vector project_l1_ball(const Vector& v, double r) {
  require(r > 0.0, "project_l1_ball: radius must be > 0");
  if (v.lpNorm<1>() <= r) return v;
  std::vector<double> mags(v.size());
  for (Index i = 0; i < v.size(); ++i) mags[i] = std::abs(v(i));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    cumulative += mags[k];
    const double candidate = (cumulative - r) / static_cast<double>(k + 1);
    if (mags[k] > candidate) theta = candidate;
    else break;
  }
  return soft_threshold(v, theta);
}

double lasso_objective(const NodewiseProblem& prob, const Vector& beta, double lambda) {
  return 0.5 * beta.dot(prob.gamma_matrix * beta) - prob.gamma_vector.dot(beta) +
         lambda * beta.lpNorm<1>();
}

LassoResult solve_constrained_lasso(const NodewiseProblem& prob, const LassoConfig& cfg) {
  cfg.validate();
  const Index d = prob.gamma_vector.size();
  require_shape(prob.gamma_matrix.rows() == d && prob.gamma_matrix.cols() == d,
                "solve_constrained_lasso: Gram matrix and vector do not conform");
  LassoResult out;
  if (d == 0) {
    out.beta = Vector(0);
    out.converged = true;
    return out;
  }
  if (!prob.gamma_matrix.allFinite() || !prob.gamma_vector.allFinite())
    throw NumericalFailure("constrained lasso: non-finite problem data (row " + std::to_string(prob.j) + ")");

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (prob.gamma_matrix + prob.gamma_matrix.transpose()));
  const Vector& ev = es.eigenvalues();
  double spectral_radius = std::max(std::abs(ev(0)), std::abs(ev(d - 1)));
  if (spectral_radius <= 0.0) spectral_radius = 1.0;
  const double base_step = cfg.step_size > 0.0 ? cfg.step_size : 1.0 / spectral_radius;
  const bool indefinite = ev(0) < -1e-12 * spectral_radius;

  std::vector<Vector> starts;
  starts.push_back(Vector::Zero(d));
  if (indefinite && cfg.restarts > 0) {
    std::vector<Vector> extra;
    Vector vmin = es.eigenvectors().col(0);
    vmin *= cfg.b1 / vmin.lpNorm<1>();
    extra.push_back(vmin);
    extra.push_back(-vmin);
    std::vector<Index> order(d);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return std::abs(prob.gamma_vector(a)) > std::abs(prob.gamma_vector(b));
    });
    for (Index k : order) {
      for (double sign : {1.0, -1.0}) {
        Vector vertex = Vector::Zero(d);
        vertex(k) = sign * cfg.b1;
        extra.push_back(vertex);
      }
    }
    Rng rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(prob.j)});
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif;
    while (static_cast<int>(extra.size()) < cfg.restarts) {
      Vector g(d);
      for (Index i = 0; i < d; ++i) g(i) = gauss(rng);
      extra.push_back(g * (cfg.b1 * unif(rng) / g.lpNorm<1>()));
    }
    for (int r = 0; r < cfg.restarts; ++r) starts.push_back(extra[r]);
  }

  StartResult best;
  int total_iters = 0;
  for (const Vector& start : starts) {
    StartResult res = run_from(prob, cfg, start, base_step);
    total_iters += res.iterations;
    if (res.objective < best.objective) best = std::move(res);
  }
  out.beta = std::move(best.beta);
  out.objective = best.objective;
  out.iterations = total_iters;
  out.converged = best.converged;
  out.objective_trace = std::move(best.trace);
  return out;
}

double compute_b1_radius(const Matrix& b_star, double m_omega, double d0_bar) {
  require(m_omega >= 1.0, "compute_b1_radius: M_omega must be >= 1");
  require(d0_bar >= 1.0, "compute_b1_radius: d0_bar must be >= 1");
  require_shape(b_star.rows() == b_star.cols() && b_star.rows() > 0, "compute_b1_radius: square matrix required");
  const double dmin = b_star.diagonal().minCoeff();
  const double dmax = b_star.diagonal().maxCoeff();
  if (!(dmin > 0.0)) throw DegenerateEstimate("compute_b1_radius: non-positive diagonal in the estimate");
  return m_omega * std::sqrt(2.0 * d0_bar) * std::sqrt(dmax / dmin);
}

double compute_lambda(double b_inf_hat, double kappa_rho_tilde, double rate_underline_r_offd,
                      double c_gamma) {
  require(b_inf_hat > 0.0 && kappa_rho_tilde > 0.0 && rate_underline_r_offd > 0.0 && c_gamma > 0.0,
          "compute_lambda: all inputs must be > 0");
  return 4.0 * c_gamma * b_inf_hat * kappa_rho_tilde * rate_underline_r_offd;
}

ThetaRow assemble_theta_row(const Matrix& b_star, Index j, const Vector& beta_hat, double pivot_floor) {
  require_shape(b_star.rows() == b_star.cols(), "assemble_theta_row: matrix must be square");
  require(j >= 0 && j < b_star.rows(), "assemble_theta_row: index out of range");
  require_shape(beta_hat.size() == b_star.rows() - 1, "assemble_theta_row: beta must have length n-1");
  const double pivot = b_star(j, j) - drop_entry(b_star.row(j).transpose(), j).dot(beta_hat);
  ThetaRow row;
  if (pivot > 0.0 && std::isfinite(pivot)) {
    row.theta_jj = 1.0 / pivot;
  } else {
    row.theta_jj = pivot_floor;
    row.degenerate = true;
  }
  row.theta_row = -row.theta_jj * beta_hat;
  return row;
}

SymmetrizeMethod parse_symmetrize_method(const std::string& name) {
  if (name == "lp" || name == "exact_lp") return SymmetrizeMethod::exact_lp;
  if (name == "average") return SymmetrizeMethod::average;
  throw InvalidParameter("unknown symmetrization method '" + name + "'");
}

double matrix_linf_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

SymmetrizeResult symmetrize_theta(const Matrix& theta_tilde, SymmetrizeMethod method, int max_pivots) {
  require_shape(theta_tilde.rows() == theta_tilde.cols(), "symmetrize_theta: square input required");
  const Index n = theta_tilde.rows();
  SymmetrizeResult out;
  const Matrix average = 0.5 * (theta_tilde + theta_tilde.transpose());
  if (method == SymmetrizeMethod::average || n <= 1) {
    out.theta = average;
    return out;
  }

  struct Pair {
    Index i, j;
    double weight, sign;
  };
  std::vector<Pair> pairs;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double a = theta_tilde(j, i) - theta_tilde(i, j);
      if (a != 0.0) pairs.push_back({i, j, std::abs(a), a > 0.0 ? 1.0 : -1.0});
    }
  }
  out.theta = theta_tilde;
  if (pairs.empty()) return out;

  // Starting point: every pair's weight charged to its higher-index row.
  Vector base_load = Vector::Zero(n);
  for (const auto& p : pairs) base_load(p.j) += p.weight;
  const double top = base_load.maxCoeff();

  const Index vars = static_cast<Index>(pairs.size()) + 1;
  lp::BoundedProblem prob;
  prob.a = Matrix::Zero(n, vars);
  prob.b = (Vector::Constant(n, top) - base_load).cwiseMax(0.0);
  prob.c = Vector::Zero(vars);
  prob.upper.resize(vars);
  for (Index k = 0; k < static_cast<Index>(pairs.size()); ++k) {
    prob.a(pairs[k].i, k) = 1.0;
    prob.a(pairs[k].j, k) = -1.0;
    prob.upper(k) = pairs[k].weight;
  }
  const Index slack = vars - 1;  // t = top - s
  prob.a.col(slack).setOnes();
  prob.c(slack) = 1.0;
  prob.upper(slack) = top;

  const lp::Solution sol = lp::solve_bounded(prob, max_pivots);
  if (sol.status != lp::Status::optimal) {
    out.theta = average;
    out.fell_back = true;
    return out;
  }
  for (Index k = 0; k < static_cast<Index>(pairs.size()); ++k) {
    const auto& p = pairs[k];
    const double alpha = std::clamp(sol.x(k), 0.0, p.weight);
    const double value = theta_tilde(p.i, p.j) + p.sign * alpha;
    out.theta(p.i, p.j) = value;
    out.theta(p.j, p.i) = value;
  }
  return out;
}

PrecisionEstimate estimate_precision(const Matrix& b_star, const PrecisionConfig& cfg) {
  require_shape(b_star.rows() == b_star.cols() && b_star.rows() >= 1, "estimate_precision: square input required");
  cfg.lasso.validate();
  const Index n = b_star.rows();
  PrecisionEstimate est;
  est.beta_rows.resize(n);
  est.convergence.resize(n);
  est.theta_tilde = Matrix::Zero(n, n);
  est.diag_values.resize(n);
  std::vector<char> degenerate(n, 0);

  parallel_for(n, cfg.jobs, [&](Index j) {
    const NodewiseProblem prob = gram_parts(b_star, j);
    LassoResult res = solve_constrained_lasso(prob, cfg.lasso);
    const ThetaRow row = assemble_theta_row(b_star, j, res.beta, cfg.pivot_floor);
    est.theta_tilde(j, j) = row.theta_jj;
    est.theta_tilde.row(j).head(j) = row.theta_row.head(j).transpose();
    est.theta_tilde.row(j).tail(n - 1 - j) = row.theta_row.tail(n - 1 - j).transpose();
    est.diag_values(j) = row.theta_jj;
    degenerate[j] = row.degenerate ? 1 : 0;
    est.convergence[j] = {res.iterations, res.objective, res.converged};
    est.beta_rows[j] = std::move(res.beta);
  });
  for (Index j = 0; j < n; ++j)
    if (degenerate[j]) est.degenerate_rows.push_back(j);

  SymmetrizeResult sym = symmetrize_theta(est.theta_tilde, cfg.sym_method);
  est.theta_hat = std::move(sym.theta);
  est.symmetrize_fell_back = sym.fell_back;
  return est;
}

PrecisionEstimate estimate_precision_from_data(const Matrix& x_obs, const PrecisionConfig& cfg) {
  const MaskMatrixM m_hat = build_M_hat(estimate_sampling_probs_from_support(x_obs));
  const CovarianceEstimate b_star = estimate_B_star(x_obs, estimate_MM_hat(x_obs, m_hat));
  return estimate_precision(b_star.matrix, cfg);
}

}  // namespace maskcov
