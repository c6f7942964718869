#include "maskcov/data_synthesis.hpp"

#include "mc.hpp"

#include <doctest.h>

#include <cmath>

using namespace maskcov;

TEST_CASE("rademacher entries are signs") {
  Rng rng = make_stream(1);
  const Matrix z = sample_subgaussian(30, 40, NoiseKind::rademacher, rng);
  CHECK((z.array().abs() == 1.0).all());
}

TEST_CASE("uniform_scaled entries stay in the support") {
  Rng rng = make_stream(2);
  const Matrix z = sample_subgaussian(50, 50, NoiseKind::uniform_scaled, rng);
  CHECK(z.cwiseAbs().maxCoeff() <= std::sqrt(3.0));
}

TEST_CASE("noise moments over 10^6 entries") {
  for (NoiseKind kind : {NoiseKind::gaussian, NoiseKind::rademacher, NoiseKind::uniform_scaled}) {
    Rng rng = make_stream(3, {static_cast<std::uint64_t>(kind)});
    const Matrix z = sample_subgaussian(1000, 1000, kind, rng);
    const double mean = z.mean();
    const double var = (z.array() - mean).square().sum() / (z.size() - 1.0);
    CHECK(std::abs(mean) < 4e-3);
    CHECK(std::abs(var - 1.0) < 1e-2);
  }
}

TEST_CASE("noise kind names round trip") {
  for (NoiseKind kind : {NoiseKind::gaussian, NoiseKind::rademacher, NoiseKind::uniform_scaled})
    CHECK(parse_noise_kind(to_string(kind)) == kind);
  CHECK_THROWS_AS(parse_noise_kind("cauchy"), InvalidParameter);
}

TEST_CASE("identity factors leave Z unchanged") {
  Rng rng = make_stream(4);
  const Matrix z = sample_subgaussian(5, 7, NoiseKind::gaussian, rng);
  CHECK(sample_matrix_variate(Matrix::Identity(5, 5), Matrix::Identity(7, 7), z) == z);
  CHECK(sample_matrix_variate(CovarianceFactor::identity(5), CovarianceFactor::identity(7), z) == z);
}

TEST_CASE("ar1 recursion factor is the Cholesky factor") {
  const Index m = 9;
  const double rho = 0.6;
  const Matrix a = ar1_covariance(m, rho).matrix();
  const CovarianceFactor f = CovarianceFactor::ar1(m, rho);
  const Matrix lower = f.left_apply(Matrix::Identity(m, m));
  CHECK((lower * lower.transpose() - a).cwiseAbs().maxCoeff() < 1e-13);
  const Matrix l_chol = a.llt().matrixL();
  CHECK((lower - l_chol).cwiseAbs().maxCoeff() < 1e-13);
  Rng rng = make_stream(5);
  const Matrix z = sample_subgaussian(4, m, NoiseKind::gaussian, rng);
  CHECK((f.right_apply(z) - z * l_chol.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  const CovarianceFactor d = CovarianceFactor::dense(a);
  const Matrix h = d.left_apply(Matrix::Identity(m, m));
  CHECK((h * h - a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("second moments of the matrix-variate draw") {
  const Index n = 4;
  const Index m = 3;
  const Matrix b0 = ar1_covariance(n, 0.5).matrix();
  const Matrix a0 = ar1_covariance(m, 0.4).matrix();
  const Matrix bh = symmetric_sqrt(b0);
  const Matrix ah = symmetric_sqrt(a0);
  std::vector<Matrix> draws;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    Rng rng = make_stream(6, {static_cast<std::uint64_t>(t)});
    draws.push_back(sample_matrix_variate(bh, ah, sample_subgaussian(n, m, NoiseKind::gaussian, rng)));
  }
  for (Index j = 0; j < m; ++j) {
    const auto s = mctest::entrywise_stats(trials, [&](int t) {
      const Vector col = draws[t].col(j);
      return Matrix(col * col.transpose());
    });
    CHECK(s.max_z(a0(j, j) * b0) < 4.0);
  }
  const auto rows = mctest::entrywise_stats(trials, [&](int t) { return Matrix(draws[t] * draws[t].transpose()); });
  CHECK(rows.max_z(a0.trace() * b0) < 4.0);
}

TEST_CASE("mask edge cases and column frequencies") {
  Rng rng = make_stream(7);
  CHECK((sample_mask(6, 5, Vector::Ones(5), rng).array() == 1.0).all());
  CHECK((sample_mask(6, 5, Vector::Zero(5), rng).array() == 0.0).all());
  CHECK_THROWS_AS(sample_mask(3, 2, Vector::Constant(2, 1.5), rng), InvalidParameter);
  CHECK_THROWS_AS(sample_mask(3, 2, Vector::Constant(3, 0.5), rng), DimensionError);

  Vector p(4);
  p << 0.1, 0.5, 0.7, 0.95;
  const Index rows = 100000;
  const Matrix u = sample_mask(rows, 4, p, rng);
  for (Index j = 0; j < 4; ++j) {
    const double freq = u.col(j).mean();
    CHECK(std::abs(freq - p(j)) <= 4.0 * std::sqrt(p(j) * (1 - p(j)) / rows));
  }
}

TEST_CASE("mask entries are pairwise uncorrelated") {
  const int reps = 10000;
  Vector p(3);
  p << 0.3, 0.6, 0.8;
  Matrix sum = Matrix::Zero(6, 1);
  std::vector<Matrix> masks;
  for (int r = 0; r < reps; ++r) {
    Rng rng = make_stream(8, {static_cast<std::uint64_t>(r)});
    masks.push_back(sample_mask(2, 3, p, rng));
  }
  // Correlation between entry (0,0) and each other entry.
  const auto entry = [&](int r, Index k) { return masks[r](k % 2, k / 2); };
  for (Index k = 1; k < 6; ++k) {
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (int r = 0; r < reps; ++r) {
      const double a = entry(r, 0);
      const double b = entry(r, k);
      s1 += a;
      s2 += b;
      s11 += a * a;
      s22 += b * b;
      s12 += a * b;
    }
    const double cov = s12 / reps - (s1 / reps) * (s2 / reps);
    const double corr = cov / std::sqrt((s11 / reps - std::pow(s1 / reps, 2)) * (s22 / reps - std::pow(s2 / reps, 2)));
    CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(reps)));
  }
}

TEST_CASE("apply_mask") {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  CHECK(apply_mask(Matrix::Ones(2, 2), x) == x);
  CHECK(apply_mask(Matrix::Zero(2, 2), x) == Matrix::Zero(2, 2));
  Matrix u = Matrix::Ones(2, 2);
  u(1, 0) = 0;
  Matrix expected = x;
  expected(1, 0) = 0;
  CHECK(apply_mask(u, x) == expected);
  CHECK_THROWS_AS(apply_mask(Matrix::Ones(2, 3), x), DimensionError);
}

TEST_CASE("synthesize is deterministic per stream") {
  const Index n = 5;
  const Index m = 40;
  const auto bf = CovarianceFactor::dense(ar1_covariance(n, 0.5).matrix());
  const auto af = CovarianceFactor::ar1(m, 0.3);
  const Vector p = Vector::Constant(m, 0.6);
  auto draw = [&](std::uint64_t seed) {
    Rng nr = make_stream(seed, {3, 0});
    Rng mr = make_stream(seed, {3, 1});
    return synthesize(bf, af, p, nr, mr, {NoiseKind::gaussian, true});
  };
  const auto a = draw(11);
  const auto b = draw(11);
  const auto c = draw(12);
  CHECK(a.x_obs == b.x_obs);
  CHECK(a.mask == b.mask);
  CHECK(a.x_obs != c.x_obs);
  CHECK(a.x_obs == apply_mask(a.mask, *a.x_full));

  // Streams do not depend on what was drawn before.
  Rng s1 = make_stream(11, {3, 0});
  Rng junk = make_stream(11, {0, 0});
  for (int i = 0; i < 100; ++i) junk();
  Rng s2 = make_stream(11, {3, 0});
  CHECK(s1() == s2());
  CHECK(make_stream(11, {3, 0})() != make_stream(11, {0, 3})());
}

TEST_CASE("identity covariances give identity column covariance") {
  const Index n = 3;
  const Index m = 3;
  const int trials = 10000;
  std::vector<Matrix> xs;
  for (int t = 0; t < trials; ++t) {
    Rng nr = make_stream(13, {static_cast<std::uint64_t>(t), 0});
    Rng mr = make_stream(13, {static_cast<std::uint64_t>(t), 1});
    xs.push_back(synthesize(CovarianceFactor::identity(n), CovarianceFactor::identity(m), Vector::Ones(m), nr, mr)
                     .x_obs);
  }
  const auto s = mctest::entrywise_stats(trials, [&](int t) { return Matrix(xs[t].transpose() * xs[t] / n); });
  CHECK(s.max_z(Matrix::Identity(m, m)) < 4.5);
}
