#include "maskcov/harness/experiments.hpp"

#include "maskcov/covariance_estimators.hpp"
#include "maskcov/harness/csv.hpp"
#include "maskcov/mask_estimation.hpp"
#include "maskcov/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

namespace maskcov::harness {
namespace {

constexpr Index kUnbiasedBlock = 250;

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

std::string cell_path(const std::string& dir, const std::string& prefix, Index n, Index m, double p) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) /
          (prefix + "_n" + std::to_string(n) + "_m" + std::to_string(m) + "_p" + format_double(p) + ".csv"))
      .string();
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (c == ':' || c == '/' || c == '\\') c = '_';
  return s;
}

std::vector<Index> index_list(const Config& cfg, const std::string& section, const std::string& list_key,
                              const std::string& scalar_key) {
  std::vector<Index> out;
  if (cfg.has(section, list_key)) {
    for (long long v : cfg.get_int_list(section, list_key)) out.push_back(static_cast<Index>(v));
  } else if (cfg.has(section, scalar_key)) {
    out.push_back(static_cast<Index>(cfg.get_int(section, scalar_key)));
  }
  return out;
}

std::vector<double> double_list(const Config& cfg, const std::string& section, const std::string& list_key,
                                const std::string& scalar_key) {
  if (cfg.has(section, list_key)) return cfg.get_double_list(section, list_key);
  if (cfg.has(section, scalar_key)) return {cfg.get_double(section, scalar_key)};
  return {};
}

std::optional<double> optional_double(const Config& cfg, const std::string& section, const std::string& key) {
  if (!cfg.has(section, key)) return std::nullopt;
  return cfg.get_double(section, key);
}

std::uint64_t seed_from(const Config& cfg, const std::string& section) {
  const long long s = cfg.get_int(section, "seed", 0);
  if (s < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

int int_from(const Config& cfg, const std::string& section, const std::string& key, int fallback) {
  return static_cast<int>(cfg.get_int(section, key, fallback));
}

Matrix correlation_of(const Matrix& b) {
  const Vector d = b.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * b * d.asDiagonal();
}

std::pair<double, double> extreme_eigenvalues(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigenvalue computation failed");
  return {es.eigenvalues()(0), es.eigenvalues()(s.rows() - 1)};
}

double column_l1_norm(const Matrix& m) {
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace

// ---------------------------------------------------------------- metrics

MetricsConfig metrics_config_from(const Config& cfg, const std::string& section) {
  MetricsConfig mc;
  if (cfg.has(section, "models")) mc.models = cfg.get_string_list(section, "models");
  auto n = index_list(cfg, section, "n_list", "n");
  if (!n.empty()) mc.n_list = n;
  mc.dump_dir = cfg.get_string(section, "dump_dir", "");
  return mc;
}

std::vector<MetricsRow> run_metrics(const MetricsConfig& cfg) {
  require(!cfg.models.empty() && !cfg.n_list.empty(), "run_metrics: models and n_list must be non-empty");
  std::vector<MetricsRow> rows;
  for (const auto& text : cfg.models) {
    const ModelSpec spec = ModelSpec::parse(text);
    for (Index n : cfg.n_list) {
      const CovarianceModel model = spec.build(n);
      rows.push_back({text, n, spec.rho(n), model.metrics()});
      if (!cfg.dump_dir.empty()) {
        std::filesystem::create_directories(cfg.dump_dir);
        write_matrix_csv((std::filesystem::path(cfg.dump_dir) /
                          ("model_" + file_safe(text) + "_n" + std::to_string(n) + ".csv"))
                             .string(),
                         model.matrix());
      }
    }
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows, const Provenance& prov) {
  write_provenance(out, prov);
  out << "model,n,rho,inf_norm,op_norm,entrywise_l1_over_op,inf_over_op,effective_rank,cond,diag_min,diag_max\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.model << ',' << r.n << ',' << format_double(r.rho) << ',' << format_double(m.inf_norm) << ','
        << format_double(m.op_norm) << ',' << format_double(m.entrywise_l1_over_op) << ','
        << format_double(m.inf_over_op) << ',' << format_double(m.effective_rank) << ','
        << format_double(m.cond) << ',' << format_double(m.diag_min) << ',' << format_double(m.diag_max)
        << '\n';
  }
}

// ------------------------------------------------------------------ sweep

SweepEstimator parse_sweep_estimator(const std::string& name) {
  if (name == "b_star") return SweepEstimator::b_star;
  if (name == "oracle_B_tilde" || name == "oracle") return SweepEstimator::oracle_B_tilde;
  throw ConfigError("unknown estimator '" + name + "' (expected b_star or oracle_B_tilde)");
}

std::string to_string(SweepEstimator e) {
  return e == SweepEstimator::b_star ? "b_star" : "oracle_B_tilde";
}

void SweepConfig::validate() const {
  require(trials >= 1, "sweep: trials must be >= 1");
  require(jobs >= 1, "sweep: jobs must be >= 1");
  require(!n_list.empty(), "sweep: n_list must be non-empty");
  require(!p_list.empty(), "sweep: p_list must be non-empty");
  require(m_list.empty() != x_list.empty(), "sweep: give exactly one of m_list and x_list");
  for (double p : p_list) require(p > 0.0 && p <= 1.0, "sweep: every p must lie in (0, 1]");
  for (Index n : n_list) require(n >= 2, "sweep: every n must be >= 2");
  for (Index m : m_list) require(m >= 1, "sweep: every m must be >= 1");
  for (double x : x_list) require(x > 0.0, "sweep: every x must be > 0");
}

Index columns_for_rescaled_size(const ModelSpec& model_a, Index n, double p, double x) {
  require(p > 0.0 && p <= 1.0 && x > 0.0 && n >= 1, "columns_for_rescaled_size: invalid arguments");
  const double base = x * static_cast<double>(n) / (p * p);
  Index m = std::max<Index>(1, std::llround(base));
  for (int iter = 0; iter < 100; ++iter) {
    const Index next = std::max<Index>(1, std::llround(base * model_a.operator_norm(m)));
    if (next == m) break;
    m = next;
  }
  return m;
}

double rescaled_size(const ModelSpec& model_a, Index n, Index m, double p) {
  const Vector a_diag = model_a.diagonal(m);
  const RateBundle r = compute_rates(a_diag, Vector::Constant(m, p), model_a.operator_norm(m), a_diag.maxCoeff(),
                                     a_diag.minCoeff(), n, m, 1);
  return r.x_rescale;
}

SweepConfig sweep_config_from(const Config& cfg, const std::string& section) {
  SweepConfig sc;
  sc.model_b = cfg.get_string(section, "model_b", sc.model_b);
  sc.model_a = cfg.get_string(section, "model_a", sc.model_a);
  auto n = index_list(cfg, section, "n_list", "n");
  if (!n.empty()) sc.n_list = n;
  sc.m_list = index_list(cfg, section, "m_list", "m");
  sc.x_list = double_list(cfg, section, "x_list", "x");
  auto p = double_list(cfg, section, "p_list", "p");
  if (!p.empty()) sc.p_list = p;
  sc.trials = int_from(cfg, section, "trials", sc.trials);
  sc.seed = seed_from(cfg, section);
  sc.noise = parse_noise_kind(cfg.get_string(section, "noise", "gaussian"));
  sc.estimator = parse_sweep_estimator(cfg.get_string(section, "estimator", "b_star"));
  sc.oracle_p = cfg.get_bool(section, "oracle_p", false);
  sc.jobs = int_from(cfg, section, "jobs", 1);
  sc.dump_dir = cfg.get_string(section, "dump_dir", "");
  return sc;
}

std::vector<ExperimentRecord> run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const ModelSpec spec_b = ModelSpec::parse(cfg.model_b);
  const ModelSpec spec_a = ModelSpec::parse(cfg.model_a);
  const SynthesisOptions opts{cfg.noise, false};

  struct Outcome {
    double err = 0.0;
    bool degenerate = false;
    double trace_dev = 0.0;
  };

  std::vector<ExperimentRecord> records;
  for (Index n : cfg.n_list) {
    const CovarianceModel b0 = spec_b.build(n);
    const Matrix target = cfg.estimator == SweepEstimator::b_star ? normalize_trace(b0.matrix()) : b0.matrix();
    const CovarianceFactor b_factor = CovarianceFactor::dense(b0.matrix());
    for (double p : cfg.p_list) {
      std::vector<Index> ms = cfg.m_list;
      if (ms.empty())
        for (double x : cfg.x_list) ms.push_back(columns_for_rescaled_size(spec_a, n, p, x));
      for (Index m : ms) {
        const CovarianceFactor a_factor = spec_a.factor(m, cfg.noise);
        const Vector pv = Vector::Constant(m, p);
        const Vector a_diag = spec_a.diagonal(m);
        std::vector<Outcome> out(static_cast<std::size_t>(cfg.trials));
        Matrix first_estimate;

        parallel_for(cfg.trials, cfg.jobs, [&](Index t) {
          Rng noise_rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(t), 0});
          Rng mask_rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(t), 1});
          const MaskedDataset ds = synthesize(b_factor, a_factor, pv, noise_rng, mask_rng, opts);
          CovarianceEstimate est;
          if (cfg.estimator == SweepEstimator::b_star) {
            const MaskMatrixM m_hat = build_M_hat(cfg.oracle_p ? pv : estimate_sampling_probs(ds.mask));
            est = estimate_B_star(ds.x_obs, estimate_MM_hat(ds.x_obs, m_hat));
          } else {
            est = oracle_B_tilde(ds.x_obs, a_diag, pv);
          }
          Outcome& o = out[static_cast<std::size_t>(t)];
          o.degenerate = est.degenerate_run;
          o.trace_dev = std::abs(est.matrix.trace() - static_cast<double>(n)) / static_cast<double>(n);
          if (!o.degenerate) o.err = operator_norm_error(est.matrix, target);
          if (t == 0 && !cfg.dump_dir.empty()) first_estimate = est.matrix;
        });

        ExperimentRecord rec;
        rec.model_b = cfg.model_b;
        rec.model_a = cfg.model_a;
        rec.n = n;
        rec.m = m;
        rec.p = p;
        rec.rho_a = spec_a.rho(m);
        rec.x = rescaled_size(spec_a, n, m, p);
        rec.trials = cfg.trials;
        double sum = 0.0;
        int used = 0;
        for (const auto& o : out) {
          rec.max_trace_dev = std::max(rec.max_trace_dev, o.trace_dev);
          if (o.degenerate) {
            ++rec.degenerate;
            continue;
          }
          sum += o.err;
          ++used;
        }
        if (used == 0) {
          rec.err_mean = std::numeric_limits<double>::quiet_NaN();
          rec.err_std = std::numeric_limits<double>::quiet_NaN();
        } else {
          rec.err_mean = sum / used;
          double ss = 0.0;
          for (const auto& o : out)
            if (!o.degenerate) ss += (o.err - rec.err_mean) * (o.err - rec.err_mean);
          rec.err_std = used > 1 ? std::sqrt(ss / (used - 1)) : 0.0;
        }
        records.push_back(rec);
        if (!cfg.dump_dir.empty()) write_matrix_csv(cell_path(cfg.dump_dir, "estimate", n, m, p), first_estimate);
      }
    }
  }
  return records;
}

void write_sweep_csv(std::ostream& out, const std::vector<ExperimentRecord>& records, const Provenance& prov) {
  write_provenance(out, prov);
  out << "model_b,model_a,n,m,p,rho_a,x,err_mean,err_std,trials,degenerate\n";
  for (const auto& r : records) {
    out << r.model_b << ',' << r.model_a << ',' << r.n << ',' << r.m << ',' << format_double(r.p) << ','
        << format_double(r.rho_a) << ',' << format_double(r.x) << ',' << format_double(r.err_mean) << ','
        << format_double(r.err_std) << ',' << r.trials << ',' << r.degenerate << '\n';
  }
}

RescaleFit run_rescale_fit(const std::vector<ExperimentRecord>& records, double x_min) {
  std::vector<double> lx;
  std::vector<double> ly;
  std::vector<std::string> keys;
  for (const auto& r : records) {
    if (!(r.x > x_min) || !(r.err_mean > 0.0) || !std::isfinite(r.err_mean)) continue;
    lx.push_back(std::log(r.x));
    ly.push_back(std::log(r.err_mean));
    keys.push_back(r.model_b + "|" + r.model_a + "|" + std::to_string(r.n) + "|" + format_double(r.p));
  }
  if (lx.size() < 4)
    throw InsufficientData("run_rescale_fit: need at least 4 records with x > " + format_double(x_min) +
                           ", got " + std::to_string(lx.size()));
  const double k = static_cast<double>(lx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientData("run_rescale_fit: all usable records share one x");

  RescaleFit fit;
  fit.exponent = sxy / sxx;
  const double intercept = my - fit.exponent * mx;
  fit.c0 = std::exp(intercept);
  fit.points = static_cast<Index>(lx.size());

  std::vector<std::string> order;
  std::map<std::string, std::pair<Index, double>> per_curve;
  double total = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - intercept - fit.exponent * lx[i];
    total += r * r;
    auto [it, inserted] = per_curve.try_emplace(keys[i], 0, 0.0);
    if (inserted) order.push_back(keys[i]);
    it->second.first += 1;
    it->second.second += r * r;
  }
  fit.residual = std::sqrt(total / k);
  for (const auto& key : order) {
    const auto& [count, ss] = per_curve[key];
    fit.curves.push_back({key, count, std::sqrt(ss / static_cast<double>(count))});
  }
  return fit;
}

void write_fit_csv(std::ostream& out, const RescaleFit& fit, const Provenance& prov) {
  write_provenance(out, prov);
  out << "curve,points,c0,exponent,residual\n";
  out << "all," << fit.points << ',' << format_double(fit.c0) << ',' << format_double(fit.exponent) << ','
      << format_double(fit.residual) << '\n';
  for (const auto& c : fit.curves)
    out << c.curve << ',' << c.points << ",,," << format_double(c.rms) << '\n';
}

// ---------------------------------------------------------------- inverse

void InverseConfig::validate() const {
  require(trials >= 1, "inverse: trials must be >= 1");
  require(jobs >= 1, "inverse: jobs must be >= 1");
  require(!n_list.empty(), "inverse: n_list must be non-empty");
  if (!population) {
    require(!m_list.empty() && !p_list.empty(), "inverse: m_list and p_list must be non-empty");
    for (double p : p_list) require(p > 0.0 && p <= 1.0, "inverse: every p must lie in (0, 1]");
  }
  require(!lambda || *lambda >= 0.0, "inverse: lambda must be >= 0");
  require(c_gamma > 0.0, "inverse: c_gamma must be > 0");
  require(!b1 || *b1 > 0.0, "inverse: b1 must be > 0");
  require(!m_omega || *m_omega >= 1.0, "inverse: m_omega must be >= 1");
  require(!d0_bar || *d0_bar >= 1.0, "inverse: d0_bar must be >= 1");
  require(tol > 0.0 && max_iters >= 1 && restarts >= 0, "inverse: invalid solver settings");
}

double true_row_sparsity(const Matrix& b0) {
  const Matrix theta = b0.llt().solve(Matrix::Identity(b0.rows(), b0.cols()));
  const double cut = 1e-10 * theta.cwiseAbs().maxCoeff();
  Index best = 0;
  for (Index j = 0; j < theta.rows(); ++j)
    best = std::max<Index>(best, (theta.row(j).array().abs() > cut).count());
  return static_cast<double>(best);
}

std::pair<double, double> correlation_bounds(const Matrix& b0) {
  const auto [lmin, lmax] = extreme_eigenvalues(correlation_of(b0));
  if (!(lmin > 0.0)) throw NotPositiveDefinite("correlation_bounds: correlation matrix is not positive definite");
  return {lmax / lmin, 1.0 / lmin};
}

InverseConfig inverse_config_from(const Config& cfg, const std::string& section) {
  InverseConfig ic;
  ic.model_b = cfg.get_string(section, "model_b", ic.model_b);
  ic.model_a = cfg.get_string(section, "model_a", ic.model_a);
  auto n = index_list(cfg, section, "n_list", "n");
  if (!n.empty()) ic.n_list = n;
  auto m = index_list(cfg, section, "m_list", "m");
  if (!m.empty()) ic.m_list = m;
  auto p = double_list(cfg, section, "p_list", "p");
  if (!p.empty()) ic.p_list = p;
  ic.trials = int_from(cfg, section, "trials", ic.trials);
  ic.seed = seed_from(cfg, section);
  ic.noise = parse_noise_kind(cfg.get_string(section, "noise", "gaussian"));
  ic.jobs = int_from(cfg, section, "jobs", 1);
  ic.population = cfg.get_bool(section, "population", false);
  ic.lambda = optional_double(cfg, section, "lambda");
  ic.c_gamma = cfg.get_double(section, "c_gamma", ic.c_gamma);
  ic.b1 = optional_double(cfg, section, "b1");
  ic.m_omega = optional_double(cfg, section, "m_omega");
  ic.d0_bar = optional_double(cfg, section, "d0_bar");
  ic.sym_method = parse_symmetrize_method(cfg.get_string(section, "sym_method", "lp"));
  ic.tol = cfg.get_double(section, "tol", ic.tol);
  ic.max_iters = int_from(cfg, section, "max_iters", ic.max_iters);
  ic.restarts = int_from(cfg, section, "restarts", ic.restarts);
  ic.dump_dir = cfg.get_string(section, "dump_dir", "");
  return ic;
}

std::vector<InverseRecord> run_inverse(const InverseConfig& cfg) {
  cfg.validate();
  const ModelSpec spec_b = ModelSpec::parse(cfg.model_b);
  const ModelSpec spec_a = ModelSpec::parse(cfg.model_a);
  const SynthesisOptions opts{cfg.noise, false};

  struct Outcome {
    bool skipped = false;
    bool degenerate = false;
    double lambda = 0.0;
    double b1 = 0.0;
    double err_l1 = 0.0;
    double err_max = 0.0;
  };

  auto solve = [&](const Matrix& b_hat, const Matrix& theta0, double lambda, double b1, std::uint64_t seed,
                   Outcome& o, Matrix* keep) {
    PrecisionConfig pc;
    pc.lasso.lambda = lambda;
    pc.lasso.b1 = b1;
    pc.lasso.tol = cfg.tol;
    pc.lasso.max_iters = cfg.max_iters;
    pc.lasso.restarts = cfg.restarts;
    pc.lasso.seed = seed;
    pc.sym_method = cfg.sym_method;
    const PrecisionEstimate pe = estimate_precision(b_hat, pc);
    const Matrix diff = pe.theta_hat - theta0;
    o.lambda = lambda;
    o.b1 = b1;
    o.err_l1 = column_l1_norm(diff);
    o.err_max = diff.cwiseAbs().maxCoeff();
    o.degenerate = !pe.degenerate_rows.empty() || pe.symmetrize_fell_back;
    if (keep) *keep = pe.theta_hat;
  };

  std::vector<InverseRecord> records;
  for (Index n : cfg.n_list) {
    const CovarianceModel b0 = spec_b.build(n);
    const Matrix b_star = normalize_trace(b0.matrix());
    const Matrix theta0 = b_star.llt().solve(Matrix::Identity(n, n));
    const auto [kappa_rho, m_omega_true] = correlation_bounds(b0.matrix());
    const double m_omega = cfg.m_omega.value_or(std::max(1.0, m_omega_true));
    const double d0 = cfg.d0_bar.value_or(true_row_sparsity(b_star));

    auto finish = [&](InverseRecord rec, const std::vector<Outcome>& out) {
      std::vector<double> l1;
      std::vector<double> mx;
      std::vector<double> lam;
      std::vector<double> rad;
      for (const auto& o : out) {
        if (o.degenerate || o.skipped) ++rec.degenerate;
        if (o.skipped) continue;
        l1.push_back(o.err_l1);
        mx.push_back(o.err_max);
        lam.push_back(o.lambda);
        rad.push_back(o.b1);
      }
      rec.err_l1_median = median(l1);
      rec.err_max_median = median(mx);
      rec.lambda = median(lam);
      rec.b1 = median(rad);
      rec.trials = static_cast<int>(out.size());
      records.push_back(rec);
    };

    if (cfg.population) {
      InverseRecord rec;
      rec.model_b = cfg.model_b;
      rec.model_a = cfg.model_a;
      rec.n = n;
      rec.p = 1.0;
      std::vector<Outcome> out(1);
      Matrix theta_hat;
      const double b1 = cfg.b1.value_or(compute_b1_radius(b_star, m_omega, d0));
      solve(b_star, theta0, cfg.lambda.value_or(0.0), b1, cfg.seed, out[0], &theta_hat);
      if (!cfg.dump_dir.empty()) write_matrix_csv(cell_path(cfg.dump_dir, "theta", n, 0, 1.0), theta_hat);
      finish(rec, out);
      continue;
    }

    const CovarianceFactor b_factor = CovarianceFactor::dense(b0.matrix());
    for (double p : cfg.p_list) {
      for (Index m : cfg.m_list) {
        const CovarianceFactor a_factor = spec_a.factor(m, cfg.noise);
        const Vector pv = Vector::Constant(m, p);
        const Vector a_diag = spec_a.diagonal(m);
        const RateBundle rates = compute_rates(a_diag, pv, spec_a.operator_norm(m), a_diag.maxCoeff(),
                                               a_diag.minCoeff(), n, m, 1);
        std::vector<Outcome> out(static_cast<std::size_t>(cfg.trials));
        Matrix first_theta;

        parallel_for(cfg.trials, cfg.jobs, [&](Index t) {
          const auto tt = static_cast<std::uint64_t>(t);
          Rng noise_rng = make_stream(cfg.seed, {tt, 0});
          Rng mask_rng = make_stream(cfg.seed, {tt, 1});
          const MaskedDataset ds = synthesize(b_factor, a_factor, pv, noise_rng, mask_rng, opts);
          const CovarianceEstimate est = estimate_B_star_from_mask(ds.x_obs, ds.mask);
          Outcome& o = out[static_cast<std::size_t>(t)];
          if (est.degenerate_run || !(est.matrix.diagonal().minCoeff() > 0.0)) {
            o.skipped = true;
            return;
          }
          const double lambda = cfg.lambda.value_or(
              compute_lambda(est.matrix.diagonal().maxCoeff(), kappa_rho, rates.underline_r_offd, cfg.c_gamma));
          const double b1 = cfg.b1.value_or(compute_b1_radius(est.matrix, m_omega, d0));
          solve(est.matrix, theta0, lambda, b1, cfg.seed + tt, o, t == 0 ? &first_theta : nullptr);
        });

        InverseRecord rec;
        rec.model_b = cfg.model_b;
        rec.model_a = cfg.model_a;
        rec.n = n;
        rec.m = m;
        rec.p = p;
        rec.rho_a = spec_a.rho(m);
        rec.x = rates.x_rescale;
        if (!cfg.dump_dir.empty() && first_theta.size() > 0)
          write_matrix_csv(cell_path(cfg.dump_dir, "theta", n, m, p), first_theta);
        finish(rec, out);
      }
    }
  }
  return records;
}

void write_inverse_csv(std::ostream& out, const std::vector<InverseRecord>& records, const Provenance& prov) {
  write_provenance(out, prov);
  out << "model_b,model_a,n,m,p,rho_a,x,lambda,b1,err_l1_median,err_max_median,trials,degenerate\n";
  for (const auto& r : records) {
    out << r.model_b << ',' << r.model_a << ',' << r.n << ',' << r.m << ',' << format_double(r.p) << ','
        << format_double(r.rho_a) << ',' << format_double(r.x) << ',' << format_double(r.lambda) << ','
        << format_double(r.b1) << ',' << format_double(r.err_l1_median) << ','
        << format_double(r.err_max_median) << ',' << r.trials << ',' << r.degenerate << '\n';
  }
}

// --------------------------------------------------------------- unbiased

void UnbiasedConfig::validate() const {
  require(n >= 2 && m >= 1, "unbiased: need n >= 2 and m >= 1");
  require(trials >= 2, "unbiased: trials must be >= 2");
  require(jobs >= 1, "unbiased: jobs must be >= 1");
  if (p_vector.empty()) {
    require(p > 0.0 && p <= 1.0, "unbiased: p must lie in (0, 1]");
  } else {
    require(static_cast<Index>(p_vector.size()) == m, "unbiased: p_vector must have m entries");
    for (double v : p_vector) require(v > 0.0 && v <= 1.0, "unbiased: every p must lie in (0, 1]");
  }
}

UnbiasedConfig unbiased_config_from(const Config& cfg, const std::string& section) {
  UnbiasedConfig uc;
  uc.model_b = cfg.get_string(section, "model_b", uc.model_b);
  uc.model_a = cfg.get_string(section, "model_a", uc.model_a);
  uc.n = static_cast<Index>(cfg.get_int(section, "n", uc.n));
  uc.m = static_cast<Index>(cfg.get_int(section, "m", uc.m));
  uc.p = cfg.get_double(section, "p", uc.p);
  if (cfg.has(section, "p_vector")) uc.p_vector = cfg.get_double_list(section, "p_vector");
  uc.trials = int_from(cfg, section, "trials", uc.trials);
  uc.seed = seed_from(cfg, section);
  uc.noise = parse_noise_kind(cfg.get_string(section, "noise", "gaussian"));
  uc.jobs = int_from(cfg, section, "jobs", 1);
  return uc;
}

std::vector<BiasRow> run_unbiased(const UnbiasedConfig& cfg) {
  cfg.validate();
  const ModelSpec spec_b = ModelSpec::parse(cfg.model_b);
  const ModelSpec spec_a = ModelSpec::parse(cfg.model_a);
  const Index n = cfg.n;
  const Index m = cfg.m;
  const Matrix b0 = spec_b.build(n).matrix();
  const Matrix a0 = spec_a.build(m).matrix();
  const Vector a_diag = a0.diagonal();
  Vector pv = Vector::Constant(m, cfg.p);
  if (!cfg.p_vector.empty()) pv = Eigen::Map<const Vector>(cfg.p_vector.data(), m);
  const CovarianceFactor b_factor = CovarianceFactor::dense(b0);
  const CovarianceFactor a_factor = spec_a.factor(m, cfg.noise);
  const SynthesisOptions opts{cfg.noise, false};

  const MaskSummaries oracle_m = oracle_mask_B(a_diag, pv, n);
  const double trace_scale = b0.trace() / static_cast<double>(n);
  const Vector mm_target = (Vector(2) << trace_scale * oracle_m.diag_value, trace_scale * oracle_m.offd_value).finished();

  const Index nb = n * (n + 1) / 2;
  const Index na = m * (m + 1) / 2;
  const Index width = nb + na + 2;
  auto pack = [&](const Matrix& b_est, const Matrix& a_est, const MaskSummaries& mm, Vector& d) {
    Index k = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i <= j; ++i) d(k++) = b_est(i, j) - b0(i, j);
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i <= j; ++i) d(k++) = a_est(i, j) - a0(i, j);
    d(k++) = mm.diag_value - mm_target(0);
    d(k++) = mm.offd_value - mm_target(1);
  };

  const Index trials = cfg.trials;
  const Index blocks = (trials + kUnbiasedBlock - 1) / kUnbiasedBlock;
  std::vector<Vector> sums(static_cast<std::size_t>(blocks), Vector::Zero(width));
  std::vector<Vector> squares(static_cast<std::size_t>(blocks), Vector::Zero(width));

  parallel_for(blocks, cfg.jobs, [&](Index blk) {
    Vector d(width);
    Vector& s = sums[static_cast<std::size_t>(blk)];
    Vector& q = squares[static_cast<std::size_t>(blk)];
    const Index end = std::min(trials, (blk + 1) * kUnbiasedBlock);
    for (Index t = blk * kUnbiasedBlock; t < end; ++t) {
      const auto tt = static_cast<std::uint64_t>(t);
      Rng noise_rng = make_stream(cfg.seed, {tt, 0});
      Rng mask_rng = make_stream(cfg.seed, {tt, 1});
      const MaskedDataset ds = synthesize(b_factor, a_factor, pv, noise_rng, mask_rng, opts);
      const Matrix b_est = oracle_B_tilde(ds.x_obs, a_diag, pv).matrix;
      const Matrix a_est = oracle_A_tilde(ds.x_obs, b0.trace(), pv).matrix;
      const MaskSummaries mm = estimate_MM_hat(ds.x_obs, build_M_hat(estimate_sampling_probs(ds.mask)));
      pack(b_est, a_est, mm, d);
      s += d;
      q += d.cwiseProduct(d);
    }
  });

  Vector sum = Vector::Zero(width);
  Vector sq = Vector::Zero(width);
  for (Index b = 0; b < blocks; ++b) {
    sum += sums[static_cast<std::size_t>(b)];
    sq += squares[static_cast<std::size_t>(b)];
  }
  const double tn = static_cast<double>(trials);
  Vector z(width);
  for (Index k = 0; k < width; ++k) {
    const double mean = sum(k) / tn;
    const double var = std::max(0.0, (sq(k) - sum(k) * sum(k) / tn) / (tn - 1.0));
    const double se = std::sqrt(var / tn);
    if (se > 0.0) {
      z(k) = mean / se;
    } else {
      z(k) = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
  }

  auto row = [&](const std::string& name, Index begin, Index count) {
    const auto seg = z.segment(begin, count).cwiseAbs();
    return BiasRow{name, count, seg.maxCoeff(), seg.mean(), cfg.trials};
  };
  return {row("oracle_B_tilde", 0, nb), row("oracle_A_tilde", nb, na), row("mm_hat_diag", nb + na, 1),
          row("mm_hat_offd", nb + na + 1, 1)};
}

void write_unbiased_csv(std::ostream& out, const std::vector<BiasRow>& rows, const Provenance& prov) {
  write_provenance(out, prov);
  out << "estimator,entries,max_abs_z,mean_abs_z,trials\n";
  for (const auto& r : rows)
    out << r.estimator << ',' << r.entries << ',' << format_double(r.max_abs_z) << ','
        << format_double(r.mean_abs_z) << ',' << r.trials << '\n';
}

// --------------------------------------------------------------- re-check

void RecheckConfig::validate() const {
  require(n >= 2, "re-check: n must be >= 2");
  require(s0 >= 1 && s0 <= n, "re-check: s0 must lie in [1, n]");
  require(p > 0.0 && p <= 1.0, "re-check: p must lie in (0, 1]");
  require(!m || *m >= 1, "re-check: m must be >= 1");
  require(m || x > 0.0, "re-check: x must be > 0");
  require(samples >= 1 && draws >= 1 && jobs >= 1, "re-check: samples, draws and jobs must be >= 1");
  require(tail_n >= 2 && tail_m >= 1 && tail_p > 0.0 && tail_p <= 1.0 && tail_c > 0.0,
          "re-check: invalid tail-check instance");
  require(tail_thresholds.empty() || tail_replicates >= 1000, "re-check: tail_replicates must be >= 1000");
}

RecheckConfig recheck_config_from(const Config& cfg, const std::string& section) {
  RecheckConfig rc;
  rc.model_b = cfg.get_string(section, "model_b", rc.model_b);
  rc.model_a = cfg.get_string(section, "model_a", rc.model_a);
  rc.n = static_cast<Index>(cfg.get_int(section, "n", rc.n));
  if (cfg.has(section, "m")) rc.m = static_cast<Index>(cfg.get_int(section, "m"));
  rc.x = cfg.get_double(section, "x", rc.x);
  rc.p = cfg.get_double(section, "p", rc.p);
  rc.s0 = static_cast<Index>(cfg.get_int(section, "s0", rc.s0));
  rc.samples = static_cast<Index>(cfg.get_int(section, "samples", rc.samples));
  rc.draws = int_from(cfg, section, "draws", rc.draws);
  rc.seed = seed_from(cfg, section);
  rc.noise = parse_noise_kind(cfg.get_string(section, "noise", "gaussian"));
  rc.estimator = parse_sweep_estimator(cfg.get_string(section, "estimator", "oracle_B_tilde"));
  rc.jobs = int_from(cfg, section, "jobs", 1);
  if (cfg.has(section, "tail_thresholds")) rc.tail_thresholds = cfg.get_double_list(section, "tail_thresholds");
  rc.tail_n = static_cast<Index>(cfg.get_int(section, "tail_n", rc.tail_n));
  rc.tail_m = static_cast<Index>(cfg.get_int(section, "tail_m", rc.tail_m));
  rc.tail_p = cfg.get_double(section, "tail_p", rc.tail_p);
  rc.tail_replicates = static_cast<Index>(cfg.get_int(section, "tail_replicates", rc.tail_replicates));
  rc.tail_c = cfg.get_double(section, "tail_c", rc.tail_c);
  return rc;
}

RecheckResult run_recheck(const RecheckConfig& cfg) {
  cfg.validate();
  const ModelSpec spec_b = ModelSpec::parse(cfg.model_b);
  const ModelSpec spec_a = ModelSpec::parse(cfg.model_a);
  const Index n = cfg.n;
  const Matrix b0 = spec_b.build(n).matrix();
  const Matrix target = cfg.estimator == SweepEstimator::b_star ? normalize_trace(b0) : b0;

  RecheckResult res;
  res.m = cfg.m.value_or(columns_for_rescaled_size(spec_a, n, cfg.p, cfg.x));
  res.x = rescaled_size(spec_a, n, res.m, cfg.p);
  std::tie(res.lambda_min, res.lambda_max) = extreme_eigenvalues(target);

  const Index m = res.m;
  const CovarianceFactor b_factor = CovarianceFactor::dense(b0);
  const CovarianceFactor a_factor = spec_a.factor(m, cfg.noise);
  const Vector pv = Vector::Constant(m, cfg.p);
  const Vector a_diag = spec_a.diagonal(m);
  const SynthesisOptions opts{cfg.noise, false};

  res.draws.resize(static_cast<std::size_t>(cfg.draws));
  parallel_for(cfg.draws, cfg.jobs, [&](Index d) {
    const auto dd = static_cast<std::uint64_t>(d);
    Rng noise_rng = make_stream(cfg.seed, {dd, 0});
    Rng mask_rng = make_stream(cfg.seed, {dd, 1});
    Rng sample_rng = make_stream(cfg.seed, {dd, 2});
    const MaskedDataset ds = synthesize(b_factor, a_factor, pv, noise_rng, mask_rng, opts);
    const Matrix g = cfg.estimator == SweepEstimator::b_star
                         ? estimate_B_star_from_mask(ds.x_obs, ds.mask).matrix
                         : oracle_B_tilde(ds.x_obs, a_diag, pv).matrix;
    res.draws[static_cast<std::size_t>(d)] =
        check_re_conditions(g, res.lambda_min, res.lambda_max, cfg.s0, cfg.samples, sample_rng);
  });

  if (!cfg.tail_thresholds.empty()) {
    const Matrix bt = spec_b.build(cfg.tail_n).matrix();
    const Vector q = Vector::Constant(cfg.tail_n, 1.0 / std::sqrt(static_cast<double>(cfg.tail_n)));
    Rng tail_rng = make_stream(cfg.seed, {0, 3});
    res.tail = empirical_tail_check(spec_a.diagonal(cfg.tail_m), Vector::Constant(cfg.tail_m, cfg.tail_p), bt, q,
                                    q, cfg.tail_replicates, cfg.tail_thresholds, tail_rng, cfg.tail_c);
  }
  return res;
}

void write_recheck_csv(std::ostream& out, const RecheckResult& result, const Provenance& prov) {
  write_provenance(out, prov);
  out << "# resolved.m = " << result.m << '\n';
  out << "# resolved.x = " << format_double(result.x) << '\n';
  out << "# resolved.lambda_min = " << format_double(result.lambda_min) << '\n';
  out << "# resolved.lambda_max = " << format_double(result.lambda_max) << '\n';
  out << "draw,alpha_target,tau_target,num_samples,fraction_lower_ok,fraction_upper_ok,worst_violation\n";
  for (std::size_t d = 0; d < result.draws.size(); ++d) {
    const auto& r = result.draws[d];
    out << d << ',' << format_double(r.alpha_target) << ',' << format_double(r.tau_target) << ','
        << r.num_samples << ',' << format_double(r.fraction_lower_ok) << ','
        << format_double(r.fraction_upper_ok) << ',' << format_double(r.worst_violation) << '\n';
  }
}

void write_tail_csv(std::ostream& out, const TailCheckResult& tail, const Provenance& prov) {
  write_provenance(out, prov);
  out << "# variance_proxy = " << format_double(tail.variance_proxy) << '\n';
  out << "# scale_proxy = " << format_double(tail.scale_proxy) << '\n';
  out << "# sample_std = " << format_double(tail.sample_std) << '\n';
  out << "# passed = " << (tail.passed ? "true" : "false") << '\n';
  out << "threshold,empirical,bound\n";
  for (const auto& r : tail.rows)
    out << format_double(r.threshold) << ',' << format_double(r.empirical) << ',' << format_double(r.bound)
        << '\n';
}

}  // namespace maskcov::harness
