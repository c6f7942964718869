#include "maskcov/covariance_estimators.hpp"
#include "maskcov/covariance_models.hpp"
#include "maskcov/data_synthesis.hpp"
#include "maskcov/harness/config.hpp"
#include "maskcov/harness/experiments.hpp"
#include "maskcov/inverse_covariance.hpp"
#include "maskcov/mask_estimation.hpp"
#include "maskcov/spectral_diagnostics.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace maskcov;

namespace {

py::dict metrics_dict(const MatrixMetrics& m) {
  py::dict d;
  d["inf_norm"] = m.inf_norm;
  d["op_norm"] = m.op_norm;
  d["entrywise_l1_over_op"] = m.entrywise_l1_over_op;
  d["inf_over_op"] = m.inf_over_op;
  d["effective_rank"] = m.effective_rank;
  d["cond"] = m.cond;
  d["diag_max"] = m.diag_max;
  d["diag_min"] = m.diag_min;
  d["lambda_min"] = m.lambda_min;
  d["lambda_max"] = m.lambda_max;
  return d;
}

py::dict synthesize_py(const Matrix& b, const Matrix& a, const Vector& p, std::uint64_t seed, std::uint64_t trial,
                       const std::string& noise) {
  const auto bf = CovarianceFactor::dense(b);
  const auto af = CovarianceFactor::dense(a);
  Rng noise_rng = make_stream(seed, {trial, 0});
  Rng mask_rng = make_stream(seed, {trial, 1});
  auto ds = synthesize(bf, af, p, noise_rng, mask_rng, {parse_noise_kind(noise), true});
  py::dict d;
  d["x_full"] = *ds.x_full;
  d["mask"] = ds.mask;
  d["x_obs"] = ds.x_obs;
  d["p"] = ds.p;
  return d;
}

std::string run_command(const std::string& command, const std::string& config_text) {
  using namespace maskcov::harness;
  const Config cfg = Config::parse(config_text);
  std::ostringstream out;
  if (command == "metrics") {
    write_metrics_csv(out, run_metrics(metrics_config_from(cfg, command)), cfg.entries(command));
  } else if (command == "sweep") {
    write_sweep_csv(out, run_sweep(sweep_config_from(cfg, command)), cfg.entries(command));
  } else if (command == "inverse") {
    write_inverse_csv(out, run_inverse(inverse_config_from(cfg, command)), cfg.entries(command));
  } else if (command == "unbiased") {
    write_unbiased_csv(out, run_unbiased(unbiased_config_from(cfg, command)), cfg.entries(command));
  } else if (command == "re-check") {
    write_recheck_csv(out, run_recheck(recheck_config_from(cfg, command)), cfg.entries(command));
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Covariance and precision estimation for matrix-variate data with missing values";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidParameter>(m, "InvalidParameter", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefinite", base.ptr());
  py::register_exception<InsufficientRows>(m, "InsufficientRows", base.ptr());
  py::register_exception<InsufficientData>(m, "InsufficientData", base.ptr());
  auto numerical = py::register_exception<NumericalFailure>(m, "NumericalFailure", base.ptr());
  py::register_exception<DegenerateEstimate>(m, "DegenerateEstimate", numerical.ptr());
  py::register_exception<CapExceeded>(m, "CapExceeded", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  // covariance models
  m.def("ar1_covariance", [](Index n, double rho) { return CovarianceModel::ar1(n, rho).matrix(); },
        py::arg("n"), py::arg("rho"));
  m.def("star_block_covariance",
        [](Index n, Index blocks, double rho) { return CovarianceModel::star_block(n, blocks, rho).matrix(); },
        py::arg("n"), py::arg("num_blocks"), py::arg("rho"));
  m.def("matrix_metrics", [](const Matrix& b) { return metrics_dict(matrix_metrics(b)); }, py::arg("b"));
  m.def("symmetric_sqrt", &symmetric_sqrt, py::arg("s"));
  m.def("normalize_trace", py::overload_cast<const Matrix&>(&normalize_trace), py::arg("b"));
  m.def("ar1_operator_norm", &ar1_operator_norm, py::arg("n"), py::arg("rho"));

  // data synthesis
  m.def("synthesize", &synthesize_py, py::arg("b"), py::arg("a"), py::arg("p"), py::arg("seed") = 0,
        py::arg("trial") = 0, py::arg("noise") = "gaussian",
        "Draws X = B^1/2 Z A^1/2 and a Bernoulli(p_j) column mask from the (seed, trial) streams.");

  // mask estimation
  m.def("estimate_sampling_probs", &estimate_sampling_probs, py::arg("mask"));
  m.def("oracle_mask_B",
        [](const Vector& a_diag, const Vector& p, Index n) {
          const auto s = oracle_mask_B(a_diag, p, n);
          return py::make_tuple(s.diag_value, s.offd_value);
        },
        py::arg("a_diag"), py::arg("p"), py::arg("n"));
  m.def("estimate_MM_hat",
        [](const Matrix& x_obs, const Vector& p_hat) {
          const auto s = estimate_MM_hat(x_obs, build_M_hat(p_hat));
          return py::make_tuple(s.diag_value, s.offd_value);
        },
        py::arg("x_obs"), py::arg("p_hat"));

  // covariance estimators
  m.def("oracle_B_tilde",
        [](const Matrix& x, const Vector& a_diag, const Vector& p) { return oracle_B_tilde(x, a_diag, p).matrix; },
        py::arg("x_obs"), py::arg("a_diag"), py::arg("p"));
  m.def("oracle_A_tilde",
        [](const Matrix& x, double trace_b, const Vector& p) { return oracle_A_tilde(x, trace_b, p).matrix; },
        py::arg("x_obs"), py::arg("trace_b"), py::arg("p"));
  m.def("estimate_A_star", [](const Matrix& x, const Vector& p_hat) { return estimate_A_star(x, build_M_hat(p_hat)).matrix; },
        py::arg("x_obs"), py::arg("p_hat"));
  m.def("estimate_B_star", [](const Matrix& x, const Matrix& mask) { return estimate_B_star_from_mask(x, mask).matrix; },
        py::arg("x_obs"), py::arg("mask"));

  // inverse covariance
  m.def("project_l1_ball", &project_l1_ball, py::arg("v"), py::arg("r"));
  m.def("solve_constrained_lasso",
        [](const Matrix& gamma, const Vector& g, double lambda, double b1, int max_iters, double tol) {
          LassoConfig cfg;
          cfg.lambda = lambda;
          cfg.b1 = b1;
          cfg.max_iters = max_iters;
          cfg.tol = tol;
          const auto r = solve_constrained_lasso({gamma, g, 0}, cfg);
          return py::make_tuple(r.beta, r.objective, r.converged);
        },
        py::arg("gamma_matrix"), py::arg("gamma_vector"), py::arg("lambda_") = 0.0, py::arg("b1") = 1.0,
        py::arg("max_iters") = 20000, py::arg("tol") = 1e-10);
  m.def("estimate_precision",
        [](const Matrix& b, double lambda, double b1, const std::string& sym, int jobs) {
          PrecisionConfig cfg;
          cfg.lasso.lambda = lambda;
          cfg.lasso.b1 = b1;
          cfg.sym_method = parse_symmetrize_method(sym);
          cfg.jobs = jobs;
          return estimate_precision(b, cfg).theta_hat;
        },
        py::arg("b_star"), py::arg("lambda_") = 0.0, py::arg("b1") = 1.0, py::arg("sym_method") = "lp",
        py::arg("jobs") = 1);
  m.def("symmetrize_theta",
        [](const Matrix& t, const std::string& method) {
          return symmetrize_theta(t, parse_symmetrize_method(method)).theta;
        },
        py::arg("theta_tilde"), py::arg("method") = "lp");
  m.def("compute_b1_radius", &compute_b1_radius, py::arg("b_star"), py::arg("m_omega"), py::arg("d0_bar"));
  m.def("compute_lambda", &compute_lambda, py::arg("b_inf_hat"), py::arg("kappa_rho_tilde"),
        py::arg("rate_underline_r_offd"), py::arg("c_gamma") = 1.0);

  // spectral diagnostics
  m.def("sparse_max_eigenvalue",
        [](const Matrix& a, Index s0, bool greedy) {
          return sparse_max_eigenvalue(a, s0, greedy ? SparseEigenMode::greedy : SparseEigenMode::exact);
        },
        py::arg("m"), py::arg("s0"), py::arg("greedy") = false);
  m.def("psi_B", [](const Matrix& b, Index s0) { return psi_B(b, s0); }, py::arg("b"), py::arg("s0"));
  m.def("compute_rates",
        [](const Vector& a_diag, const Vector& p, double a_op, double a_inf, double a_min, Index n, Index mm,
           Index s0, double eps) {
          const auto r = compute_rates(a_diag, p, a_op, a_inf, a_min, n, mm, s0, eps);
          py::dict d;
          d["r_offd_s0"] = r.r_offd_s0;
          d["r_diag"] = r.r_diag;
          d["underline_r_offd"] = r.underline_r_offd;
          d["x_rescale"] = r.x_rescale;
          return d;
        },
        py::arg("a_diag"), py::arg("p"), py::arg("a_op_norm"), py::arg("a_inf"), py::arg("a_min"), py::arg("n"),
        py::arg("m"), py::arg("s0"), py::arg("epsilon") = 0.25);
  m.def("check_re_conditions",
        [](const Matrix& g, double lmin, double lmax, Index s0, Index num, std::uint64_t seed) {
          Rng rng = make_stream(seed);
          const auto r = check_re_conditions(g, lmin, lmax, s0, num, rng);
          return py::make_tuple(r.fraction_lower_ok, r.fraction_upper_ok, r.worst_violation);
        },
        py::arg("g"), py::arg("lambda_min"), py::arg("lambda_max"), py::arg("s0"), py::arg("num_samples"),
        py::arg("seed") = 0);
  m.def("operator_norm_error", &operator_norm_error, py::arg("b_hat"), py::arg("b0"));

  // harness
  m.def("run_command", &run_command, py::arg("command"), py::arg("config_text"),
        "Runs a harness command (metrics, sweep, inverse, unbiased, re-check) and returns its CSV text.");
}
