#pragma once

#include "maskcov/covariance_models.hpp"
#include "maskcov/data_synthesis.hpp"
#include "maskcov/harness/config.hpp"
#include "maskcov/harness/model_spec.hpp"
#include "maskcov/inverse_covariance.hpp"
#include "maskcov/spectral_diagnostics.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace maskcov::harness {

using Provenance = std::vector<std::pair<std::string, std::string>>;

// ---------------------------------------------------------------- metrics

struct MetricsConfig {
  std::vector<std::string> models{"ar1:0.3", "ar1:0.7", "star:1:invsqrt"};
  std::vector<Index> n_list{64, 128, 256};
  std::string dump_dir;  // writes each generated matrix when non-empty
};

struct MetricsRow {
  std::string model;
  Index n = 0;
  double rho = 0.0;
  MatrixMetrics metrics;
};

MetricsConfig metrics_config_from(const Config& cfg, const std::string& section = "metrics");
std::vector<MetricsRow> run_metrics(const MetricsConfig& cfg);
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows, const Provenance& prov);

// ------------------------------------------------------------------ sweep

enum class SweepEstimator { oracle_B_tilde, b_star };
SweepEstimator parse_sweep_estimator(const std::string& name);
std::string to_string(SweepEstimator e);

struct SweepConfig {
  std::string model_b = "ar1:0.7";
  std::string model_a = "ar1:0.3";
  std::vector<Index> n_list{64};
  // Either explicit column counts or target rescaled sizes x (m is then the
  // integer closest to x n ||A_m||_2 / p^2).
  std::vector<Index> m_list;
  std::vector<double> x_list;
  std::vector<double> p_list{1.0};
  int trials = 100;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::gaussian;
  SweepEstimator estimator = SweepEstimator::b_star;
  bool oracle_p = false;  // b_star normalizer from the true p instead of p_hat
  int jobs = 1;
  std::string dump_dir;  // first-trial estimate of every cell
  void validate() const;
};

struct ExperimentRecord {
  std::string model_b;
  std::string model_a;
  Index n = 0;
  Index m = 0;
  double p = 0.0;
  double rho_a = 0.0;
  double x = 0.0;
  double err_mean = 0.0;
  double err_std = 0.0;
  int trials = 0;
  int degenerate = 0;
  // max over trials of |tr(estimate) - n| / n
  double max_trace_dev = 0.0;
};

/// Smallest fixed point of m = round(x n ||A_m||_2 / p^2).
Index columns_for_rescaled_size(const ModelSpec& model_a, Index n, double p, double x);

/// compute_rates(...).x_rescale for a uniform-p cell.
double rescaled_size(const ModelSpec& model_a, Index n, Index m, double p);

SweepConfig sweep_config_from(const Config& cfg, const std::string& section = "sweep");
std::vector<ExperimentRecord> run_sweep(const SweepConfig& cfg);
void write_sweep_csv(std::ostream& out, const std::vector<ExperimentRecord>& records, const Provenance& prov);

struct CurveResidual {
  std::string curve;  // model_b|model_a|n|p
  Index points = 0;
  double rms = 0.0;   // RMS log residual against the global fit
};

struct RescaleFit {
  double c0 = 0.0;
  double exponent = 0.0;
  double residual = 0.0;  // RMS log residual
  Index points = 0;
  std::vector<CurveResidual> curves;
};

/// Least squares of log err = log c0 + exponent log x over records with
/// x > x_min. Throws InsufficientData with fewer than four usable points.
RescaleFit run_rescale_fit(const std::vector<ExperimentRecord>& records, double x_min = 2.0);
void write_fit_csv(std::ostream& out, const RescaleFit& fit, const Provenance& prov);

// ---------------------------------------------------------------- inverse

struct InverseConfig {
  std::string model_b = "ar1:0.5";
  std::string model_a = "ar1:0.3";
  std::vector<Index> n_list{32};
  std::vector<Index> m_list{2000};
  std::vector<double> p_list{0.8};
  int trials = 100;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::gaussian;
  int jobs = 1;
  // Exact B0 input with a single evaluation per n; m and p are ignored.
  bool population = false;

  std::optional<double> lambda;
  double c_gamma = 1.0;
  std::optional<double> b1;
  std::optional<double> m_omega;
  std::optional<double> d0_bar;
  SymmetrizeMethod sym_method = SymmetrizeMethod::exact_lp;
  double tol = 1e-10;
  int max_iters = 20000;
  int restarts = 8;
  std::string dump_dir;
  void validate() const;
};

struct InverseRecord {
  std::string model_b;
  std::string model_a;
  Index n = 0;
  Index m = 0;
  double p = 0.0;
  double rho_a = 0.0;
  double x = 0.0;
  double lambda = 0.0;  // median over trials
  double b1 = 0.0;      // median over trials
  double err_l1_median = 0.0;
  double err_max_median = 0.0;
  int trials = 0;
  int degenerate = 0;
};

/// Number of nonzeros (diagonal included) in the densest row of B0^-1.
double true_row_sparsity(const Matrix& b0);

/// ||rho(B0)||_2 ||rho(B0)^-1||_2 and ||rho(B0)^-1||_2.
std::pair<double, double> correlation_bounds(const Matrix& b0);

InverseConfig inverse_config_from(const Config& cfg, const std::string& section = "inverse");
std::vector<InverseRecord> run_inverse(const InverseConfig& cfg);
void write_inverse_csv(std::ostream& out, const std::vector<InverseRecord>& records, const Provenance& prov);

// --------------------------------------------------------------- unbiased

struct UnbiasedConfig {
  std::string model_b = "ar1:0.5";
  std::string model_a = "ar1:0.3";
  Index n = 4;
  Index m = 30;
  double p = 0.7;
  std::vector<double> p_vector;  // per-column probabilities, overrides p
  int trials = 10000;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::gaussian;
  int jobs = 1;
  void validate() const;
};

struct BiasRow {
  std::string estimator;  // oracle_B_tilde, oracle_A_tilde, mm_hat_diag, mm_hat_offd
  Index entries = 0;
  double max_abs_z = 0.0;
  double mean_abs_z = 0.0;
  int trials = 0;
};

UnbiasedConfig unbiased_config_from(const Config& cfg, const std::string& section = "unbiased");
std::vector<BiasRow> run_unbiased(const UnbiasedConfig& cfg);
void write_unbiased_csv(std::ostream& out, const std::vector<BiasRow>& rows, const Provenance& prov);

// --------------------------------------------------------------- re-check

struct RecheckConfig {
  std::string model_b = "ar1:0.5";
  std::string model_a = "ar1:0.3";
  Index n = 32;
  std::optional<Index> m;
  double x = 8.0;  // used when m is not given
  double p = 0.6;
  Index s0 = 4;
  Index samples = 10000;
  int draws = 20;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::gaussian;
  SweepEstimator estimator = SweepEstimator::oracle_B_tilde;
  int jobs = 1;

  std::vector<double> tail_thresholds;  // tail check runs when non-empty
  Index tail_n = 4;
  Index tail_m = 20;
  double tail_p = 0.5;
  Index tail_replicates = 10000;
  double tail_c = 0.01;
  void validate() const;
};

struct RecheckResult {
  Index m = 0;
  double x = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::vector<REReport> draws;
  std::optional<TailCheckResult> tail;
};

RecheckConfig recheck_config_from(const Config& cfg, const std::string& section = "re-check");
RecheckResult run_recheck(const RecheckConfig& cfg);
void write_recheck_csv(std::ostream& out, const RecheckResult& result, const Provenance& prov);
void write_tail_csv(std::ostream& out, const TailCheckResult& tail, const Provenance& prov);

}  // namespace maskcov::harness
