#include "maskcov/inverse_covariance.hpp"

#include "maskcov/covariance_estimators.hpp"
#include "maskcov/covariance_models.hpp"
#include "maskcov/data_synthesis.hpp"
#include "maskcov/lp.hpp"
#include "maskcov/spectral_diagnostics.hpp"

#include "lasso_oracle.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <cmath>
#include <limits>

using namespace maskcov;

namespace {

Matrix random_spd(Index n, std::uint64_t seed) {
  Rng rng = make_stream(seed);
  const Matrix z = sample_subgaussian(n, n + 3, NoiseKind::gaussian, rng);
  return z * z.transpose() / static_cast<double>(n + 3) + 0.3 * Matrix::Identity(n, n);
}

Matrix random_matrix(Index r, Index c, Rng& rng) {
  return sample_subgaussian(r, c, NoiseKind::gaussian, rng);
}

struct RandomLasso {
  Matrix g;
  Vector gv;
};

RandomLasso random_lasso_problem(Index d, Rng& rng, double lo, double hi) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(d, d, rng));
  const Matrix q = qr.householderQ();
  std::uniform_real_distribution<double> eig(lo, hi);
  Vector ev(d);
  for (Index i = 0; i < d; ++i) ev(i) = eig(rng);
  Matrix g = q * ev.asDiagonal() * q.transpose();
  g = 0.5 * (g + g.transpose());
  return {g, random_matrix(d, 1, rng).col(0)};
}

LassoConfig lasso(double lambda, double b1) {
  LassoConfig cfg;
  cfg.lambda = lambda;
  cfg.b1 = b1;
  return cfg;
}

}  // namespace

TEST_CASE("population regression targets") {
  const auto id = population_regression_targets(Matrix::Identity(4, 4), 2);
  CHECK(id.beta_star.cwiseAbs().maxCoeff() == 0.0);
  CHECK(id.resid_var == doctest::Approx(1.0));

  Matrix b(2, 2);
  b << 1, 0.5, 0.5, 1;
  const auto t = population_regression_targets(b, 1);
  CHECK(t.beta_star.size() == 1);
  CHECK(t.beta_star(0) == doctest::Approx(0.5));
  CHECK(t.resid_var == doctest::Approx(0.75));

  const Matrix s = random_spd(5, 41);
  const Matrix theta = s.inverse();
  for (Index j = 0; j < 5; ++j)
    for (Index l = 0; l < 5; ++l)
      if (l != j) CHECK(std::abs(s.row(l).dot(theta.row(j))) < 1e-10);
}

TEST_CASE("nodewise extraction bookkeeping") {
  Matrix b(3, 3);
  b << 1, 2, 3, 2, 5, 6, 3, 6, 9;
  const auto p = gram_parts(b, 2);
  Matrix g(2, 2);
  g << 1, 2, 2, 5;
  CHECK(p.gamma_matrix == g);
  CHECK(p.gamma_vector(0) == 3);
  CHECK(p.gamma_vector(1) == 6);
  const auto q = gram_parts(b, 1);
  CHECK(q.gamma_matrix(0, 1) == 3);
  CHECK(q.gamma_vector(0) == 2);
  CHECK(q.gamma_vector(1) == 6);
  CHECK(q.gamma_matrix == q.gamma_matrix.transpose());
}

TEST_CASE("nodewise parts from data match submatrices of B_star") {
  Rng rng = make_stream(42);
  const Index n = 7;
  const Index m = 25;
  const Matrix u = sample_mask(n, m, Vector::Constant(m, 0.6), rng);
  const Matrix x = apply_mask(u, random_matrix(n, m, rng));
  const MaskSummaries mm = estimate_MM_hat(x, build_M_hat(estimate_sampling_probs(u)));
  const Matrix bs = estimate_B_star(x, mm).matrix;
  for (Index j = 0; j < n; ++j) {
    const auto a = gram_parts(bs, j);
    const auto b = gram_parts_from_data(x, mm, j);
    CHECK((a.gamma_matrix - b.gamma_matrix).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.gamma_vector - b.gamma_vector).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("l1 ball projection") {
  Vector v(2);
  v << 0.3, -0.2;
  CHECK(project_l1_ball(v, 1.0) == v);
  v << 3, 1;
  Vector p = project_l1_ball(v, 2.0);
  CHECK(p(0) == doctest::Approx(2.0));
  CHECK(std::abs(p(1)) < 1e-15);
  v << -3, 1;
  p = project_l1_ball(v, 2.0);
  CHECK(p(0) == doctest::Approx(-2.0));
  CHECK(std::abs(p(1)) < 1e-15);
}

TEST_CASE("l1 ball projection against a brute-force grid") {
  Rng rng = make_stream(43);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = 2.0 * random_matrix(2, 1, rng).col(0);
    const double r = 1.0;
    const Vector p = project_l1_ball(v, r);
    CHECK(p.lpNorm<1>() <= r + 1e-12);
    double best = std::numeric_limits<double>::infinity();
    const double h = 1e-3;
    for (int i = -1000; i <= 1000; ++i) {
      const double x = i * h;
      const double rem = r - std::abs(x);
      // the closest point in y for fixed x is the clamp of v(1)
      const double y = std::clamp(v(1), -rem, rem);
      best = std::min(best, std::hypot(x - v(0), y - v(1)));
    }
    CHECK((p - v).norm() <= best + 1e-12);
  }
}

TEST_CASE("soft threshold") {
  Vector v(3);
  v << 1.5, -0.2, -2;
  const Vector s = soft_threshold(v, 0.5);
  CHECK(s(0) == doctest::Approx(1.0));
  CHECK(s(1) == 0.0);
  CHECK(s(2) == doctest::Approx(-1.5));
}

TEST_CASE("constrained lasso closed forms") {
  NodewiseProblem p1{Matrix::Identity(2, 2), Vector(2), 0};
  p1.gamma_vector << 1, 0.2;
  const auto r1 = solve_constrained_lasso(p1, lasso(0.5, 10.0));
  CHECK(r1.beta(0) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(std::abs(r1.beta(1)) < 1e-10);

  NodewiseProblem p2{Matrix::Identity(2, 2), Vector(2), 0};
  p2.gamma_vector << 2, 0;
  const auto r2 = solve_constrained_lasso(p2, lasso(0.0, 1.0));
  CHECK(r2.beta(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(r2.beta(1)) < 1e-10);

  const Matrix s = random_spd(6, 44);
  Rng rng = make_stream(45);
  NodewiseProblem p3{s, random_matrix(6, 1, rng).col(0), 0};
  const Vector exact = s.llt().solve(p3.gamma_vector);
  const auto r3 = solve_constrained_lasso(p3, lasso(0.0, 10.0 * exact.lpNorm<1>()));
  CHECK((r3.beta - exact).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(r3.converged);
}

TEST_CASE("constrained lasso monotone trace and feasibility") {
  Rng rng = make_stream(46);
  for (int t = 0; t < 25; ++t) {
    const auto prob = random_lasso_problem(6, rng, -0.5, 2.0);
    const NodewiseProblem p{prob.g, prob.gv, 0};
    for (double b1 : {0.5, 3.0}) {
      const auto r = solve_constrained_lasso(p, lasso(0.2, b1));
      CHECK(r.beta.lpNorm<1>() <= b1 + 1e-10);
      for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
        CHECK(r.objective_trace[k] <= r.objective_trace[k - 1]);
      CHECK(r.objective == doctest::Approx(lasso_objective(p, r.beta, 0.2)));
    }
  }
}

TEST_CASE("constrained lasso matches face enumeration in 3 dimensions") {
  Rng rng = make_stream(47);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    const auto prob = random_lasso_problem(3, rng, -0.5, 2.0);
    for (double lambda : {0.0, 0.3}) {
      for (double b1 : {1.0, 5.0}) {
        const auto r = solve_constrained_lasso({prob.g, prob.gv, 0}, lasso(lambda, b1));
        const auto o = lasso_oracle::face_enumeration_minimum(prob.g, prob.gv, lambda, b1);
        CHECK(r.objective <= o.value + 1e-8);
        CHECK(r.objective >= o.value - 1e-9);
        ++checked;
      }
    }
  }
  CHECK(checked == 240);
}

TEST_CASE("face enumeration agrees with the grid on small balls") {
  Rng rng = make_stream(48);
  for (int t = 0; t < 6; ++t) {
    const auto prob = random_lasso_problem(3, rng, -0.5, 2.0);
    const double grid = lasso_oracle::grid_minimum_3d(prob.g, prob.gv, 0.3, 1.0, 2e-3);
    const double exact = lasso_oracle::face_enumeration_minimum(prob.g, prob.gv, 0.3, 1.0).value;
    CHECK(exact <= grid + 1e-12);
    CHECK(grid - exact < 1e-3);
  }
}

TEST_CASE("lasso config validation") {
  NodewiseProblem p{Matrix::Identity(2, 2), Vector::Ones(2), 0};
  CHECK_THROWS_AS(solve_constrained_lasso(p, lasso(-1.0, 1.0)), InvalidParameter);
  CHECK_THROWS_AS(solve_constrained_lasso(p, lasso(0.0, 0.0)), InvalidParameter);
  NodewiseProblem bad{Matrix::Identity(2, 2), Vector::Ones(2), 0};
  bad.gamma_matrix(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_constrained_lasso(bad, lasso(0.0, 1.0)), NumericalFailure);
}

TEST_CASE("b1 radius and lambda rule") {
  CHECK(compute_b1_radius(Matrix::Identity(3, 3), 2.0, 8.0) == doctest::Approx(2.0 * 4.0));
  Matrix d = Matrix::Identity(2, 2);
  d(1, 1) = 4.0;
  CHECK(compute_b1_radius(d, 2.0, 2.0) == doctest::Approx(8.0));
  CHECK(compute_b1_radius(d, 2.0, 3.0) >= compute_b1_radius(d, 2.0, 2.0));
  Matrix d9 = d;
  d9(1, 1) = 9.0;
  CHECK(compute_b1_radius(d9, 2.0, 2.0) >= compute_b1_radius(d, 2.0, 2.0));
  CHECK_THROWS_AS(compute_b1_radius(d, 0.5, 2.0), InvalidParameter);
  Matrix z = Matrix::Identity(2, 2);
  z(0, 0) = 0.0;
  CHECK_THROWS_AS(compute_b1_radius(z, 1.0, 1.0), DegenerateEstimate);

  CHECK(compute_lambda(1.0, 1.0, 0.1, 1.0) == doctest::Approx(0.4));
  CHECK(compute_lambda(3.0, 1.0, 0.1, 1.0) == doctest::Approx(1.2));
  CHECK(compute_lambda(1.0, 2.0, 0.1, 0.5) == doctest::Approx(0.4));
}

TEST_CASE("doubling the effective sample size divides lambda by sqrt 2") {
  // n >= m keeps log(m v n) fixed while sum a_jj p_j^2 doubles.
  const Index n = 1000;
  auto rate = [&](Index m) {
    return compute_rates(Vector::Ones(m), Vector::Constant(m, 0.5), 1.0, 1.0, 1.0, n, m, 1).underline_r_offd;
  };
  const double l1 = compute_lambda(1.0, 1.0, rate(100), 1.0);
  const double l2 = compute_lambda(1.0, 1.0, rate(200), 1.0);
  CHECK(l1 / l2 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("theta row assembly") {
  Matrix b(2, 2);
  b << 1, 0.5, 0.5, 1;
  const auto row = assemble_theta_row(b, 0, Vector::Constant(1, 0.5));
  CHECK(row.theta_jj == doctest::Approx(4.0 / 3.0));
  CHECK(row.theta_row(0) == doctest::Approx(-2.0 / 3.0));
  CHECK_FALSE(row.degenerate);
  const Matrix theta = b.inverse();
  CHECK(row.theta_jj == doctest::Approx(theta(0, 0)));
  CHECK(row.theta_row(0) == doctest::Approx(theta(0, 1)));

  const auto id = assemble_theta_row(Matrix::Identity(3, 3), 1, Vector::Zero(2));
  CHECK(id.theta_jj == 1.0);
  CHECK(id.theta_row.cwiseAbs().maxCoeff() == 0.0);

  const auto bad = assemble_theta_row(b, 0, Vector::Constant(1, 3.0));
  CHECK(bad.degenerate);
  CHECK(bad.theta_jj == 1e-8);
}

TEST_CASE("population pipeline recovers the inverse") {
  const Matrix b0 = ar1_covariance(4, 0.5).matrix();
  const Matrix theta0 = b0.inverse();
  PrecisionConfig cfg;
  cfg.lasso.lambda = 0.0;
  cfg.lasso.b1 = 100.0;
  const auto est = estimate_precision(b0, cfg);
  CHECK((est.theta_tilde - theta0).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((est.theta_hat - theta0).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(est.theta_hat == est.theta_hat.transpose());
  for (Index j = 0; j < 4; ++j) {
    const auto t = population_regression_targets(b0, j);
    CHECK((est.beta_rows[j] - t.beta_star).cwiseAbs().maxCoeff() < 1e-6);
  }

  const auto ident = estimate_precision(Matrix::Identity(5, 5), cfg);
  CHECK((ident.theta_hat - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);

  const Matrix b10 = ar1_covariance(10, 0.5).matrix();
  const Matrix t10 = b10.inverse();
  cfg.lasso.b1 = 10.0 * t10.cwiseAbs().colwise().sum().maxCoeff();
  CHECK((estimate_precision(b10, cfg).theta_hat - t10).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("precision estimate does not depend on jobs") {
  Rng rng = make_stream(49);
  const Index n = 12;
  const Index m = 200;
  const Matrix u = sample_mask(n, m, Vector::Constant(m, 0.7), rng);
  const Matrix x = apply_mask(u, random_matrix(n, m, rng));
  PrecisionConfig cfg;
  cfg.lasso.lambda = 0.05;
  cfg.lasso.b1 = 5.0;
  const auto a = estimate_precision_from_data(x, cfg);
  cfg.jobs = 4;
  const auto b = estimate_precision_from_data(x, cfg);
  CHECK(a.theta_hat == b.theta_hat);
}

TEST_CASE("pivot identity omega_jj > 1 for generated models") {
  std::vector<Matrix> models = {ar1_covariance(20, 0.7).matrix(), star_block_covariance(16, 2, 0.3).matrix(),
                                random_spd(8, 50)};
  for (const auto& b : models) {
    const Matrix theta = b.inverse();
    for (Index j = 0; j < b.rows(); ++j) {
      CHECK(b(j, j) * theta(j, j) > 1.0);
      const auto t = population_regression_targets(b, j);
      CHECK(t.resid_var > 0.0);
      CHECK(t.resid_var < b(j, j));
    }
  }
}

TEST_CASE("symmetrization") {
  const Matrix s = random_spd(4, 51);
  CHECK((symmetrize_theta(s, SymmetrizeMethod::exact_lp).theta - s).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((symmetrize_theta(s, SymmetrizeMethod::average).theta - s).cwiseAbs().maxCoeff() < 1e-14);

  Matrix t(2, 2);
  t << 1, 2, 0, 1;
  CHECK(symmetrize_theta(t, SymmetrizeMethod::average).theta == Matrix::Ones(2, 2));

  CHECK(parse_symmetrize_method("lp") == SymmetrizeMethod::exact_lp);
  CHECK(parse_symmetrize_method("average") == SymmetrizeMethod::average);
  CHECK_THROWS_AS(parse_symmetrize_method("median"), InvalidParameter);
}

TEST_CASE("exact symmetrization is optimal against random symmetric competitors") {
  Rng rng = make_stream(52);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = trial % 2 ? 3 : 5;
    const Matrix t = random_matrix(n, n, rng);
    const auto lp = symmetrize_theta(t, SymmetrizeMethod::exact_lp);
    CHECK_FALSE(lp.fell_back);
    CHECK(lp.theta == lp.theta.transpose());
    const double best = matrix_linf_norm(lp.theta - t);
    const Matrix avg = symmetrize_theta(t, SymmetrizeMethod::average).theta;
    CHECK(best <= matrix_linf_norm(avg - t) + 1e-12);
    for (int k = 0; k < 20; ++k) {
      Matrix e = random_matrix(n, n, rng);
      Matrix comp = 0.5 * (t + t.transpose()) + 0.3 * (e + e.transpose());
      CHECK(best <= matrix_linf_norm(comp - t) + 1e-12);
    }
  }
}

TEST_CASE("bounded simplex on small LPs") {
  // maximize x + y  s.t.  x + 2y <= 4,  3x + y <= 6
  lp::BoundedProblem p;
  p.a.resize(2, 2);
  p.a << 1, 2, 3, 1;
  p.b.resize(2);
  p.b << 4, 6;
  p.c = Vector::Ones(2);
  p.upper = Vector::Constant(2, std::numeric_limits<double>::infinity());
  auto s = lp::solve_bounded(p);
  CHECK(s.status == lp::Status::optimal);
  CHECK(s.x(0) == doctest::Approx(1.6));
  CHECK(s.x(1) == doctest::Approx(1.2));
  CHECK(s.objective == doctest::Approx(2.8));

  // with a binding upper bound on x
  p.upper(0) = 1.0;
  s = lp::solve_bounded(p);
  CHECK(s.status == lp::Status::optimal);
  CHECK(s.x(0) == doctest::Approx(1.0));
  CHECK(s.x(1) == doctest::Approx(1.5));

  // unbounded direction
  lp::BoundedProblem u;
  u.a.resize(1, 2);
  u.a << 1, -1;
  u.b = Vector::Constant(1, 1.0);
  u.c = Vector::Ones(2);
  u.upper = Vector::Constant(2, std::numeric_limits<double>::infinity());
  CHECK(lp::solve_bounded(u).status == lp::Status::unbounded);
}
