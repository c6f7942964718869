#include "maskcov/spectral_diagnostics.hpp"

#include "maskcov/covariance_estimators.hpp"
#include "maskcov/covariance_models.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace maskcov;

namespace {

double lambda_max(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(m.rows() - 1);
}

}  // namespace

TEST_CASE("sparse max eigenvalue examples") {
  Matrix d = Matrix::Identity(4, 4);
  d(2, 2) = 3.5;
  CHECK(sparse_max_eigenvalue(d, 1) == 3.5);
  for (Index s0 = 1; s0 <= 5; ++s0) CHECK(sparse_max_eigenvalue(Matrix::Identity(5, 5), s0) == doctest::Approx(1.0));
  const Matrix a = ar1_covariance(3, 0.5).matrix().cwiseAbs();
  CHECK(sparse_max_eigenvalue(a, 2) == 1.5);
  CHECK_THROWS_AS(sparse_max_eigenvalue(a, 0), InvalidParameter);
  CHECK_THROWS_AS(sparse_max_eigenvalue(a, 4), InvalidParameter);
}

TEST_CASE("sparse max eigenvalue structure") {
  const Matrix b = star_block_covariance(12, 2, 0.4).matrix().cwiseAbs();
  double prev = 0.0;
  for (Index s0 = 1; s0 <= 12; ++s0) {
    const double v = sparse_max_eigenvalue(b, s0);
    CHECK(v >= prev - 1e-14);
    CHECK(v >= b.diagonal().maxCoeff() - 1e-14);
    const double g = sparse_max_eigenvalue(b, s0, SparseEigenMode::greedy);
    CHECK(g <= v + 1e-12);
    prev = v;
  }
  CHECK(sparse_max_eigenvalue(b, 12) == doctest::Approx(lambda_max(b)).epsilon(1e-13));
}

TEST_CASE("enumeration cap") {
  const Matrix b = ar1_covariance(60, 0.3).matrix().cwiseAbs();
  CHECK(binomial_coefficient(60, 6) == 50063860ULL);
  CHECK(binomial_coefficient(5, 7) == 0ULL);
  CHECK_THROWS_AS(sparse_max_eigenvalue(b, 6), CapExceeded);
  const double g = sparse_max_eigenvalue(b, 6, SparseEigenMode::greedy);
  CHECK(g > 1.0);
  CHECK(g <= lambda_max(b) + 1e-12);
}

TEST_CASE("psi_B bounds") {
  CHECK(psi_B(Matrix::Identity(6, 6), 3) == doctest::Approx(1.0));
  const Matrix a = ar1_covariance(3, 0.5).matrix();
  CHECK(psi_B(a, 2) == doctest::Approx(1.5 / 1.8430703308172536).epsilon(1e-12));
  CHECK(lambda_max(a) == doctest::Approx(1.8430703308172536).epsilon(1e-12));
  for (const Matrix& b : {ar1_covariance(10, 0.7).matrix(), star_block_covariance(10, 1, 0.3).matrix(),
                          ar1_covariance(10, -0.6).matrix()}) {
    for (Index s0 = 1; s0 <= 10; ++s0) {
      const double psi = psi_B(b, s0);
      CHECK(psi <= std::sqrt(static_cast<double>(s0)) + 1e-12);
      CHECK(psi >= b.diagonal().maxCoeff() / lambda_max(b) - 1e-12);
    }
  }
}

TEST_CASE("rate functions") {
  const Index n = 20;
  const Index m = 300;
  const double p = 0.6;
  const double aop = ar1_operator_norm(m, 0.3);
  const auto r = compute_rates(Vector::Ones(m), Vector::Constant(m, p), aop, 1.0, 1.0, n, m, 4);
  CHECK(r.x_rescale == doctest::Approx(m * p * p / (n * aop)).epsilon(1e-14));
  const auto full = compute_rates(Vector::Ones(m), Vector::Constant(m, p), aop, 1.0, 1.0, n, m, n);
  CHECK(full.r_offd_s0 == doctest::Approx(std::sqrt(n * std::log(3.0 * M_E / 0.25) * aop / (m * p * p))).epsilon(1e-13));

  // Quadrupling every a_jj quadruples both effective sizes; with a_op and the
  // weights held fixed every rate halves.
  const auto base = compute_rates(Vector::Ones(m), Vector::Constant(m, p), 1.0, 1.0, 1.0, n, m, 4);
  const auto quad = compute_rates(Vector::Constant(m, 4.0), Vector::Constant(m, p), 1.0, 4.0, 4.0, n, m, 4);
  CHECK(quad.r_offd_s0 == doctest::Approx(base.r_offd_s0 / 2).epsilon(1e-13));
  CHECK(quad.r_diag == doctest::Approx(base.r_diag / 2).epsilon(1e-13));
  CHECK(quad.underline_r_offd == doctest::Approx(base.underline_r_offd / 2).epsilon(1e-13));
  CHECK_THROWS_AS(compute_rates(Vector::Ones(3), Vector::Ones(3), 1.0, 1.0, 1.0, 2, 3, 1, 0.5), InvalidParameter);
}

TEST_CASE("cone sampler vectors") {
  Rng rng = make_stream(61);
  const Index n = 10;
  const Index s0 = 3;
  ConeSampler sampler(n, s0, rng);
  for (Index k = 0; k < 500; ++k) {
    const Vector v = sampler.next();
    if (k < n) CHECK(v == Vector::Unit(n, k));
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.lpNorm<1>() <= std::sqrt(static_cast<double>(s0)) + 1e-9);
  }
}

TEST_CASE("RE conditions trivial cases") {
  const Matrix b0 = ar1_covariance(15, 0.5).matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> es(b0, Eigen::EigenvaluesOnly);
  Rng rng = make_stream(62);
  const auto r = check_re_conditions(b0, es.eigenvalues()(0), es.eigenvalues()(14), 4, 3000, rng);
  CHECK(r.fraction_lower_ok == 1.0);
  CHECK(r.fraction_upper_ok == 1.0);
  CHECK(r.num_samples == 3000);
  CHECK(r.alpha_target == doctest::Approx(5.0 / 8.0 * es.eigenvalues()(0)));
  CHECK(r.tau_target == doctest::Approx(3.0 * es.eigenvalues()(0) / 32.0));

  const auto id = check_re_conditions(Matrix::Identity(8, 8), 1.0, 1.0, 2, 1000, rng);
  CHECK(id.fraction_lower_ok == 1.0);
  CHECK(id.fraction_upper_ok == 1.0);
  CHECK(id.worst_violation == 0.0);

  // A matrix with a strongly negative direction must fail somewhere.
  Matrix bad = Matrix::Identity(8, 8);
  bad(0, 0) = -5.0;
  const auto f = check_re_conditions(bad, 1.0, 1.0, 2, 1000, rng);
  CHECK(f.fraction_lower_ok < 1.0);
  CHECK(f.worst_violation > 0.0);
}

TEST_CASE("quadratic form deviation") {
  Rng rng = make_stream(63);
  CHECK(quadratic_form_deviation(Matrix::Zero(6, 6), 2, 200, rng) == 0.0);
  CHECK(quadratic_form_deviation(Matrix::Identity(6, 6), 2, 200, rng) == doctest::Approx(1.0));
  Matrix d = Matrix::Zero(6, 6);
  d(0, 0) = 2.0;
  CHECK(quadratic_form_deviation(d, 2, 50, rng) == 2.0);

  Rng r1 = make_stream(64);
  Rng r2 = make_stream(64);
  Matrix e = ar1_covariance(6, 0.4).matrix() - Matrix::Identity(6, 6);
  CHECK(quadratic_form_deviation(e, 3, 500, r1) == quadratic_form_deviation(Matrix(-e), 3, 500, r2));
}

TEST_CASE("operator norm error") {
  const Matrix b0 = ar1_covariance(5, 0.5).matrix();
  CHECK(operator_norm_error(b0, b0) == 0.0);
  CHECK(operator_norm_error(2.0 * b0, b0) == doctest::Approx(1.0));
  Matrix diag = Matrix::Identity(4, 4);
  diag(1, 1) = 2.0;
  Matrix pert = diag;
  pert(0, 0) += 1e-3;
  CHECK(operator_norm_error(pert, diag) == doctest::Approx(1e-3 / 2.0));
}

TEST_CASE("tail check degenerate cases") {
  const Index n = 4;
  const Index m = 20;
  const Vector q = Vector::Constant(n, 0.5);
  const std::vector<double> thresholds{0.1, 1.0};
  Rng rng = make_stream(65);
  const auto zero_p =
      empirical_tail_check(Vector::Ones(m), Vector::Zero(m), ar1_covariance(n, 0.5).matrix(), q, q, 1000, thresholds, rng);
  for (const auto& row : zero_p.rows) CHECK(row.empirical == 0.0);
  const auto diag =
      empirical_tail_check(Vector::Ones(m), Vector::Constant(m, 0.5), Matrix::Identity(n, n), q, q, 1000, thresholds, rng);
  for (const auto& row : diag.rows) CHECK(row.empirical == 0.0);
  CHECK(diag.sample_std == 0.0);
}

TEST_CASE("tail check on the small AR(1) instance") {
  const Index n = 4;
  const Index m = 20;
  const Vector q = Vector::Constant(n, 0.5);
  Rng rng = make_stream(66);
  const std::vector<double> thresholds{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  const auto res = empirical_tail_check(Vector::Ones(m), Vector::Constant(m, 0.5), ar1_covariance(n, 0.5).matrix(), q,
                                        q, 10000, thresholds, rng, 0.01);
  CHECK(res.passed);
  CHECK(res.rows.size() == thresholds.size());
  for (std::size_t k = 1; k < res.rows.size(); ++k) CHECK(res.rows[k].empirical <= res.rows[k - 1].empirical);
  CHECK(res.sample_std > 0.0);
}
