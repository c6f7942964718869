#pragma once

#include "maskcov/common.hpp"
#include "maskcov/covariance_models.hpp"

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>

namespace maskcov {

using Rng = std::mt19937_64;

/// Derives an independent stream from a root seed and a path of indices
/// (e.g. {trial, substream}). Identical inputs give identical streams no
/// matter how many other streams were drawn before.
Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {});

enum class NoiseKind { gaussian, rademacher, uniform_scaled };

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

/// n x m matrix of i.i.d. mean-zero, unit-variance entries.
/// uniform_scaled draws from U[-sqrt(3), sqrt(3)].
Matrix sample_subgaussian(Index n, Index m, NoiseKind kind, Rng& rng);

/// X = B_half * Z * A_half.
Matrix sample_matrix_variate(const Matrix& b_half, const Matrix& a_half, const Matrix& z);

/// A square factor F of a covariance S (F F^T = S), applied without forming
/// large dense products where the structure allows it.
///
/// dense():  F = S^{1/2}, the symmetric square root.
/// ar1():    F = lower Cholesky factor of the AR(1) matrix, applied by the
///           recursion y_t = rho y_{t-1} + sqrt(1 - rho^2) z_t in O(dim) per
///           vector. For Gaussian Z, Z F^T has the same law as Z S^{1/2}.
class CovarianceFactor {
 public:
  static CovarianceFactor dense(const Matrix& covariance);
  static CovarianceFactor from_half(Matrix half);
  static CovarianceFactor ar1(Index dim, double rho);
  static CovarianceFactor identity(Index dim);

  Index dim() const { return dim_; }

  // F * z (acts on rows of z: z.rows() == dim()).
  Matrix left_apply(const Matrix& z) const;
  // z * F^T (acts on columns of z: z.cols() == dim()).
  Matrix right_apply(const Matrix& z) const;

 private:
  enum class Kind { dense, ar1, identity };
  Kind kind_ = Kind::identity;
  Index dim_ = 0;
  double rho_ = 0.0;
  Matrix half_;
};

/// X = F_B * Z * F_A^T.
Matrix sample_matrix_variate(const CovarianceFactor& b_factor, const CovarianceFactor& a_factor,
                             const Matrix& z);

/// U[k][j] ~ Bernoulli(p_j), independent. Entries are 0.0 / 1.0.
Matrix sample_mask(Index n, Index m, const Vector& p, Rng& rng);

/// Entrywise product U o X.
Matrix apply_mask(const Matrix& u, const Matrix& x);

struct MaskedDataset {
  std::optional<Matrix> x_full;  // X, kept only on request
  Matrix mask;                   // U
  Matrix x_obs;                  // U o X
  Vector p;                      // column sampling probabilities
};

struct SynthesisOptions {
  NoiseKind noise = NoiseKind::gaussian;
  bool retain_full = false;
};

// Draws Z from noise_rng and U from mask_rng so masks can be held fixed while
// the data change (and vice versa).
MaskedDataset synthesize(const CovarianceFactor& b_factor, const CovarianceFactor& a_factor,
                         const Vector& p, Rng& noise_rng, Rng& mask_rng,
                         const SynthesisOptions& options = {});

}  // namespace maskcov
