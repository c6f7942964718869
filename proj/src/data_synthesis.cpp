#include "maskcov/data_synthesis.hpp"

#include <cmath>
#include <vector>

namespace maskcov {

Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  const auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto v : path) push(v);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "rademacher") return NoiseKind::rademacher;
  if (name == "uniform_scaled" || name == "uniform") return NoiseKind::uniform_scaled;
  throw InvalidParameter("unknown noise kind '" + name + "'");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian:
      return "gaussian";
    case NoiseKind::rademacher:
      return "rademacher";
    case NoiseKind::uniform_scaled:
      return "uniform_scaled";
  }
  return "gaussian";
}

Matrix sample_subgaussian(Index n, Index m, NoiseKind kind, Rng& rng) {
  require(n >= 1 && m >= 1, "sample_subgaussian: n, m must be >= 1");
  Matrix z(n, m);
  // Column-major fill order is part of the determinism contract.
  switch (kind) {
    case NoiseKind::gaussian: {
      std::normal_distribution<double> dist(0.0, 1.0);
      for (Index k = 0; k < z.size(); ++k) z.data()[k] = dist(rng);
      break;
    }
    case NoiseKind::rademacher: {
      for (Index k = 0; k < z.size(); ++k) z.data()[k] = (rng() >> 63) ? 1.0 : -1.0;
      break;
    }
    case NoiseKind::uniform_scaled: {
      const double a = std::sqrt(3.0);
      std::uniform_real_distribution<double> dist(-a, a);
      for (Index k = 0; k < z.size(); ++k) z.data()[k] = dist(rng);
      break;
    }
  }
  return z;
}

Matrix sample_matrix_variate(const Matrix& b_half, const Matrix& a_half, const Matrix& z) {
  require_shape(b_half.rows() == b_half.cols() && a_half.rows() == a_half.cols(),
                "sample_matrix_variate: factors must be square");
  require_shape(b_half.cols() == z.rows() && z.cols() == a_half.rows(),
                "sample_matrix_variate: shapes do not conform");
  return b_half * z * a_half;
}

CovarianceFactor CovarianceFactor::dense(const Matrix& covariance) {
  return from_half(symmetric_sqrt(covariance));
}

CovarianceFactor CovarianceFactor::from_half(Matrix half) {
  require_shape(half.rows() == half.cols(), "CovarianceFactor: factor must be square");
  CovarianceFactor f;
  f.kind_ = Kind::dense;
  f.dim_ = half.rows();
  f.half_ = std::move(half);
  return f;
}

CovarianceFactor CovarianceFactor::ar1(Index dim, double rho) {
  require(dim >= 1, "CovarianceFactor::ar1: dim must be >= 1");
  require(std::abs(rho) < 1.0, "CovarianceFactor::ar1: |rho| must be < 1");
  CovarianceFactor f;
  f.kind_ = Kind::ar1;
  f.dim_ = dim;
  f.rho_ = rho;
  return f;
}

CovarianceFactor CovarianceFactor::identity(Index dim) {
  CovarianceFactor f;
  f.kind_ = Kind::identity;
  f.dim_ = dim;
  return f;
}

Matrix CovarianceFactor::left_apply(const Matrix& z) const {
  require_shape(z.rows() == dim_, "CovarianceFactor::left_apply: shape mismatch");
  switch (kind_) {
    case Kind::identity:
      return z;
    case Kind::dense:
      return half_ * z;
    case Kind::ar1: {
      Matrix y(z.rows(), z.cols());
      const double s = std::sqrt(1.0 - rho_ * rho_);
      y.row(0) = z.row(0);
      for (Index t = 1; t < dim_; ++t) y.row(t) = rho_ * y.row(t - 1) + s * z.row(t);
      return y;
    }
  }
  return z;
}

Matrix CovarianceFactor::right_apply(const Matrix& z) const {
  require_shape(z.cols() == dim_, "CovarianceFactor::right_apply: shape mismatch");
  switch (kind_) {
    case Kind::identity:
      return z;
    case Kind::dense:
      return z * half_.transpose();
    case Kind::ar1: {
      Matrix y(z.rows(), z.cols());
      const double s = std::sqrt(1.0 - rho_ * rho_);
      y.col(0) = z.col(0);
      for (Index t = 1; t < dim_; ++t) y.col(t) = rho_ * y.col(t - 1) + s * z.col(t);
      return y;
    }
  }
  return z;
}

Matrix sample_matrix_variate(const CovarianceFactor& b_factor, const CovarianceFactor& a_factor,
                             const Matrix& z) {
  require_shape(b_factor.dim() == z.rows() && a_factor.dim() == z.cols(),
                "sample_matrix_variate: shapes do not conform");
  return b_factor.left_apply(a_factor.right_apply(z));
}

Matrix sample_mask(Index n, Index m, const Vector& p, Rng& rng) {
  require(n >= 1 && m >= 1, "sample_mask: n, m must be >= 1");
  require_shape(p.size() == m, "sample_mask: p must have length m");
  for (Index j = 0; j < m; ++j)
    require(p(j) >= 0.0 && p(j) <= 1.0, "sample_mask: probabilities must lie in [0, 1]");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix u(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < n; ++k) u(k, j) = unif(rng) < p(j) ? 1.0 : 0.0;
  return u;
}

Matrix apply_mask(const Matrix& u, const Matrix& x) {
  require_shape(u.rows() == x.rows() && u.cols() == x.cols(), "apply_mask: shape mismatch");
  return u.cwiseProduct(x);
}

MaskedDataset synthesize(const CovarianceFactor& b_factor, const CovarianceFactor& a_factor,
                         const Vector& p, Rng& noise_rng, Rng& mask_rng,
                         const SynthesisOptions& options) {
  const Index n = b_factor.dim();
  const Index m = a_factor.dim();
  Matrix z = sample_subgaussian(n, m, options.noise, noise_rng);
  Matrix x = sample_matrix_variate(b_factor, a_factor, z);
  MaskedDataset ds;
  ds.mask = sample_mask(n, m, p, mask_rng);
  ds.x_obs = apply_mask(ds.mask, x);
  ds.p = p;
  if (options.retain_full) ds.x_full = std::move(x);
  return ds;
}

}  // namespace maskcov
