#include "maskcov/spectral_diagnostics.hpp"

#include "maskcov/covariance_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace maskcov {
namespace {

double submatrix_lambda_max(const Matrix& m, const std::vector<Index>& idx) {
  const Index k = static_cast<Index>(idx.size());
  if (k == 1) return m(idx[0], idx[0]);
  if (k == 2) {
    const double a = m(idx[0], idx[0]);
    const double c = m(idx[1], idx[1]);
    const double b = 0.5 * (m(idx[0], idx[1]) + m(idx[1], idx[0]));
    return 0.5 * (a + c) + std::hypot(0.5 * (a - c), b);
  }
  Matrix sub(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) sub(a, b) = m(idx[a], idx[b]);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sub, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(k - 1);
}

double exact_sparse_max(const Matrix& m, Index s0) {
  const Index n = m.rows();
  std::vector<Index> idx(s0);
  std::iota(idx.begin(), idx.end(), Index{0});
  double best = -std::numeric_limits<double>::infinity();
  for (;;) {
    best = std::max(best, submatrix_lambda_max(m, idx));
    Index pos = s0 - 1;
    while (pos >= 0 && idx[pos] == n - s0 + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (Index k = pos + 1; k < s0; ++k) idx[k] = idx[k - 1] + 1;
  }
  return best;
}

double greedy_sparse_max(const Matrix& m, Index s0) {
  const Index n = m.rows();
  // Seeds: the indices with the largest row mass, each grown greedily.
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  const Vector mass = m.cwiseAbs().rowwise().sum();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return mass(a) > mass(b); });
  const Index num_seeds = std::min<Index>(n, 8);

  double best = -std::numeric_limits<double>::infinity();
  for (Index seed = 0; seed < num_seeds; ++seed) {
    std::vector<Index> set{order[seed]};
    std::vector<char> in(n, 0);
    in[order[seed]] = 1;
    while (static_cast<Index>(set.size()) < s0) {
      Index pick = -1;
      double pick_val = -std::numeric_limits<double>::infinity();
      for (Index k = 0; k < n; ++k) {
        if (in[k]) continue;
        set.push_back(k);
        const double v = submatrix_lambda_max(m, set);
        set.pop_back();
        if (v > pick_val) {
          pick_val = v;
          pick = k;
        }
      }
      set.push_back(pick);
      in[pick] = 1;
    }
    double current = submatrix_lambda_max(m, set);
    bool improved = true;
    for (int pass = 0; improved && pass < 50; ++pass) {
      improved = false;
      for (Index a = 0; a < s0 && !improved; ++a) {
        for (Index k = 0; k < n; ++k) {
          if (in[k]) continue;
          const Index old = set[a];
          set[a] = k;
          const double v = submatrix_lambda_max(m, set);
          if (v > current * (1.0 + 1e-14) + 1e-300) {
            in[old] = 0;
            in[k] = 1;
            current = v;
            improved = true;
            break;
          }
          set[a] = old;
        }
      }
    }
    best = std::max(best, current);
  }
  return best;
}

Vector random_signs_times(const Vector& mags, Rng& rng) {
  Vector v = mags;
  for (Index i = 0; i < v.size(); ++i)
    if (rng() >> 63) v(i) = -v(i);
  return v;
}

}  // namespace

std::uint64_t binomial_coefficient(Index n, Index k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  const std::uint64_t saturated = std::numeric_limits<std::uint64_t>::max();
  unsigned __int128 acc = 1;
  for (Index i = 1; i <= k; ++i) {
    acc = acc * static_cast<unsigned __int128>(n - k + i) / static_cast<unsigned __int128>(i);
    if (acc > saturated) return saturated;
  }
  return static_cast<std::uint64_t>(acc);
}

double sparse_max_eigenvalue(const Matrix& m, Index s0, SparseEigenMode mode, std::uint64_t enumeration_cap) {
  require_shape(m.rows() == m.cols() && m.rows() > 0, "sparse_max_eigenvalue: square matrix required");
  const Index n = m.rows();
  require(s0 >= 1 && s0 <= n, "sparse_max_eigenvalue: s0 must lie in [1, n]");
  if (s0 == 1) return m.diagonal().maxCoeff();
  if (s0 == n) return submatrix_lambda_max(m, [&] {
      std::vector<Index> all(n);
      std::iota(all.begin(), all.end(), Index{0});
      return all;
    }());
  if (mode == SparseEigenMode::greedy) return greedy_sparse_max(m, s0);
  const std::uint64_t count = binomial_coefficient(n, s0);
  if (count > enumeration_cap) {
    throw CapExceeded("sparse_max_eigenvalue: C(" + std::to_string(n) + ", " + std::to_string(s0) + ") = " +
                      std::to_string(count) + " subsets exceeds the enumeration cap " +
                      std::to_string(enumeration_cap) + "; use greedy mode");
  }
  return exact_sparse_max(m, s0);
}

double psi_B(const Matrix& b, Index s0, SparseEigenMode mode, std::uint64_t enumeration_cap) {
  return sparse_max_eigenvalue(b.cwiseAbs(), s0, mode, enumeration_cap) / symmetric_operator_norm(b);
}

RateBundle compute_rates(const Vector& a_diag, const Vector& p, double a_op_norm, double a_inf, double a_min,
                         Index n, Index m, Index s0, double epsilon) {
  require(epsilon > 0.0 && epsilon < 0.5, "compute_rates: epsilon must lie in (0, 1/2)");
  require_shape(a_diag.size() == p.size(), "compute_rates: a_diag and p lengths differ");
  require(a_op_norm > 0.0 && a_inf > 0.0 && a_min > 0.0, "compute_rates: norms must be > 0");
  require(n >= 1 && m >= 1 && s0 >= 1 && s0 <= n, "compute_rates: invalid dimensions");
  const double w1 = a_diag.dot(p);
  const double w2 = a_diag.dot(p.cwiseProduct(p));
  const double eta = std::sqrt(a_inf / a_min);
  const double log_nm = std::log(static_cast<double>(std::max(n, m)));
  const double dn = static_cast<double>(n);
  const double ds = static_cast<double>(s0);
  RateBundle r;
  r.s0 = s0;
  r.epsilon_net = epsilon;
  r.r_offd_s0 = std::sqrt(ds * std::log(3.0 * M_E * dn / (ds * epsilon)) * a_op_norm / w2);
  r.r_diag = eta * std::sqrt(a_op_norm * log_nm / w1);
  r.underline_r_offd = eta * std::sqrt(a_op_norm * log_nm / w2);
  r.x_rescale = w2 / (a_op_norm * dn);
  return r;
}

ConeSampler::ConeSampler(Index n, Index s0, Rng& rng) : n_(n), s0_(s0), rng_(rng) {
  require(n >= 1 && s0 >= 1 && s0 <= n, "ConeSampler: s0 must lie in [1, n]");
}

Vector ConeSampler::next() {
  const Index k = emitted_++;
  if (k < n_) return Vector::Unit(n_, k);
  return ((k - n_) % 2 == 0) ? sparse_draw() : dense_draw();
}

Vector ConeSampler::sparse_draw() {
  std::vector<Index> idx(n_);
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < s0_; ++i) {
    std::uniform_int_distribution<Index> pick(i, n_ - 1);
    std::swap(idx[i], idx[pick(rng_)]);
  }
  std::normal_distribution<double> gauss;
  Vector v = Vector::Zero(n_);
  for (Index i = 0; i < s0_; ++i) v(idx[i]) = gauss(rng_);
  const double norm = v.norm();
  if (norm == 0.0) return Vector::Unit(n_, idx[0]);
  return v / norm;
}

Vector ConeSampler::dense_draw() {
  static constexpr double kShapes[] = {0.1, 0.3, 1.0};
  std::uniform_int_distribution<int> shape_pick(0, 2);
  std::gamma_distribution<double> gamma(kShapes[shape_pick(rng_)], 1.0);
  Vector mags(n_);
  for (Index i = 0; i < n_; ++i) mags(i) = gamma(rng_);
  if (mags.sum() <= 0.0) mags.setOnes();
  Vector v = random_signs_times(mags / mags.sum(), rng_);
  v /= v.norm();
  const double limit = std::sqrt(static_cast<double>(s0_));
  if (v.lpNorm<1>() <= limit) return v;
  // l1/l2 of a soft-thresholded vector falls as the threshold rises.
  double lo = 0.0;
  double hi = v.cwiseAbs().maxCoeff();
  auto shrink = [&v](double t) {
    Vector w = v.unaryExpr([t](double x) {
      const double a = std::abs(x) - t;
      return a > 0.0 ? std::copysign(a, x) : 0.0;
    });
    return Vector(w / w.norm());
  };
  Vector feasible = Vector::Unit(n_, 0);
  {
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    feasible = Vector::Unit(n_, arg) * (v(arg) < 0 ? -1.0 : 1.0);
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    Vector w = shrink(mid);
    if (!w.allFinite()) {
      hi = mid;
      continue;
    }
    if (w.lpNorm<1>() > limit) {
      lo = mid;
    } else {
      hi = mid;
      feasible = std::move(w);
    }
  }
  return feasible;
}

REReport check_re_conditions(const Matrix& g, double lambda_min_B0, double lambda_max_B0, Index s0,
                             Index num_samples, Rng& rng) {
  require_shape(g.rows() == g.cols() && g.rows() > 0, "check_re_conditions: square matrix required");
  require(num_samples >= 1, "check_re_conditions: num_samples must be >= 1");
  require(lambda_min_B0 > 0.0 && lambda_max_B0 >= lambda_min_B0, "check_re_conditions: invalid eigenvalue bounds");
  REReport rep;
  rep.alpha_target = 5.0 / 8.0 * lambda_min_B0;
  rep.tau_target = 3.0 * lambda_min_B0 / (8.0 * static_cast<double>(s0));
  rep.num_samples = num_samples;
  const double upper_curv = lambda_max_B0 + 3.0 / 8.0 * lambda_min_B0;
  ConeSampler sampler(g.rows(), s0, rng);
  Index lower_ok = 0;
  Index upper_ok = 0;
  double worst = 0.0;
  for (Index k = 0; k < num_samples; ++k) {
    const Vector q = sampler.next();
    const double quad = q.dot(g * q);
    const double l2sq = q.squaredNorm();
    const double l1sq = std::pow(q.lpNorm<1>(), 2);
    const double slack = 1e-12 * (std::abs(quad) + 1.0);
    const double lower_rhs = rep.alpha_target * l2sq - rep.tau_target * l1sq;
    const double upper_rhs = upper_curv * l2sq + rep.tau_target * l1sq;
    if (quad >= lower_rhs - slack) ++lower_ok;
    if (quad <= upper_rhs + slack) ++upper_ok;
    worst = std::max({worst, lower_rhs - quad, quad - upper_rhs});
  }
  const double total = static_cast<double>(num_samples);
  rep.fraction_lower_ok = static_cast<double>(lower_ok) / total;
  rep.fraction_upper_ok = static_cast<double>(upper_ok) / total;
  rep.worst_violation = worst;
  return rep;
}

double quadratic_form_deviation(const Matrix& delta, Index s0, Index num_samples, Rng& rng) {
  require_shape(delta.rows() == delta.cols() && delta.rows() > 0, "quadratic_form_deviation: square matrix required");
  require(num_samples >= 1, "quadratic_form_deviation: num_samples must be >= 1");
  ConeSampler sampler(delta.rows(), s0, rng);
  double best = 0.0;
  for (Index k = 0; k < num_samples; ++k) {
    const Vector q = sampler.next();
    best = std::max(best, std::abs(q.dot(delta * q)));
  }
  return best;
}

double operator_norm_error(const Matrix& b_hat, const Matrix& b0) {
  require_shape(b_hat.rows() == b0.rows() && b_hat.cols() == b0.cols(), "operator_norm_error: shape mismatch");
  return symmetric_operator_norm(b_hat - b0) / symmetric_operator_norm(b0);
}

TailCheckResult empirical_tail_check(const Vector& a_diag, const Vector& p, const Matrix& b, const Vector& q,
                                     const Vector& h, Index num_replicates, const std::vector<double>& thresholds,
                                     Rng& rng, double c) {
  const Index m = a_diag.size();
  const Index n = b.rows();
  require_shape(p.size() == m, "empirical_tail_check: a_diag and p lengths differ");
  require_shape(b.cols() == n && q.size() == n && h.size() == n, "empirical_tail_check: B, q, h do not conform");
  require(num_replicates >= 1000, "empirical_tail_check: needs at least 1000 replicates");
  require(c > 0.0, "empirical_tail_check: c must be > 0");

  Matrix coeff = b.cwiseProduct(0.5 * (q * h.transpose() + h * q.transpose()));
  coeff.diagonal().setZero();
  const double coeff_sum = coeff.sum();

  const double a_inf = a_diag.maxCoeff();
  const double b_op = symmetric_operator_norm(b);
  const double abs_b_op = symmetric_operator_norm(b.cwiseAbs());
  TailCheckResult res;
  res.variance_proxy = a_inf * b_op * abs_b_op * a_diag.dot(p.cwiseProduct(p));
  res.scale_proxy = a_inf * b_op;

  std::vector<double> draws(num_replicates);
  Vector u(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index r = 0; r < num_replicates; ++r) {
    double s = 0.0;
    for (Index k = 0; k < m; ++k) {
      for (Index i = 0; i < n; ++i) u(i) = unif(rng) < p(k) ? 1.0 : 0.0;
      s += a_diag(k) * (u.dot(coeff * u) - p(k) * p(k) * coeff_sum);
    }
    draws[r] = s;
  }
  double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(num_replicates);
  double var = 0.0;
  for (double d : draws) var += (d - mean) * (d - mean);
  res.sample_std = std::sqrt(var / static_cast<double>(num_replicates - 1));

  res.passed = true;
  for (double t : thresholds) {
    TailRow row;
    row.threshold = t;
    Index exceed = 0;
    for (double d : draws)
      if (std::abs(d) > t) ++exceed;
    row.empirical = static_cast<double>(exceed) / static_cast<double>(num_replicates);
    const double quad_term = res.variance_proxy > 0.0 ? t * t / res.variance_proxy
                                                      : std::numeric_limits<double>::infinity();
    const double lin_term = res.scale_proxy > 0.0 ? t / res.scale_proxy : std::numeric_limits<double>::infinity();
    row.bound = std::exp(-c * std::min(quad_term, lin_term));
    if (row.empirical > row.bound) res.passed = false;
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace maskcov
