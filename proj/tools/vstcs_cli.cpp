// Command-line front end: matrix generation, measurement simulation,
// residual statistics, single reconstructions, bound reports, and the
// config-driven experiment harness.
//
// Exit codes: 0 success, 1 usage error, 2 runtime/domain error,
// 3 statistical/acceptance check failure. Errors print to stderr with a
// machine-parsable ERR:<CODE>: prefix.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "vstcs/bounds.hpp"
#include "vstcs/harness.hpp"
#include "vstcs/io.hpp"
#include "vstcs/noise.hpp"
#include "vstcs/sensing.hpp"
#include "vstcs/signals.hpp"
#include "vstcs/solvers.hpp"
#include "vstcs/vst.hpp"

namespace {

using vstcs::harness::ExperimentConfig;

struct CheckFailure {
  std::string message;
};

void log_run(const std::string& what, std::uint64_t seed) {
  std::cerr << "run: " << what << " seed=" << seed << '\n';
}

vstcs::noise::NoiseModel model_from(const std::string& name, double sigma,
                                    double alpha, double g) {
  if (name == "poisson") return vstcs::noise::NoiseModel::poisson();
  if (name == "pg" || name == "poisson_gaussian") {
    return vstcs::noise::NoiseModel::poisson_gaussian(sigma, alpha, g);
  }
  throw std::invalid_argument("model must be poisson or pg");
}

void cmd_gen_matrix(int n, int m, double p, std::uint64_t seed,
                    const std::string& out, bool check) {
  log_run("gen-matrix", seed);
  const auto mat = vstcs::sensing::generate_sensing_matrix(n, m, p, seed);
  const auto flux = vstcs::sensing::flux_check(mat.phi);
  if (!out.empty()) vstcs::sensing::save_matrix(out, mat);
  nlohmann::json j;
  j["N"] = n;
  j["m"] = m;
  j["p"] = p;
  j["seed"] = seed;
  j["max_col_sum"] = flux.max_col_sum;
  j["min_entry"] = flux.min_entry;
  j["flux_ok"] = flux.ok;
  j["identity_error"] = vstcs::sensing::reconstruction_identity_error(mat);
  std::cout << j.dump(2) << '\n';
  if (check && (!flux.ok || j["identity_error"].get<double>() > 1e-12)) {
    throw CheckFailure{"gen-matrix invariants violated"};
  }
}

void cmd_simulate(const std::string& matrix_path, const std::string& signal_path,
                  const std::string& model_name, double sigma, double alpha,
                  double g, double d, std::uint64_t seed,
                  const std::string& out) {
  log_run("simulate", seed);
  const auto mat = vstcs::sensing::load_matrix(matrix_path);
  const Eigen::VectorXd x = vstcs::io::read_vector_csv(signal_path);
  if (x.size() != mat.n_cols) {
    std::cerr << "ERR:DIM: signal length " << x.size()
              << " does not match matrix columns " << mat.n_cols << '\n';
    std::exit(2);
  }
  const auto model = model_from(model_name, sigma, alpha, g);
  auto meas = vstcs::noise::sample_measurements(mat, x, model, seed);
  meas = vstcs::noise::saturation_reject(meas, d);
  vstcs::noise::write_measurements_csv(out, meas);
  std::cout << "wrote " << out << " (" << meas.n_retained() << "/"
            << meas.n_total() << " retained)\n";
}

void cmd_residual_stats(const std::string& matrix_path,
                        const std::string& signal_path,
                        const std::string& model_name, double sigma,
                        double c, int trials, std::uint64_t seed,
                        const std::string& out) {
  log_run("residual-stats", seed);
  const auto mat = vstcs::sensing::load_matrix(matrix_path);
  const Eigen::VectorXd x = vstcs::io::read_vector_csv(signal_path);
  if (x.size() != mat.n_cols) {
    std::cerr << "ERR:DIM: signal length " << x.size()
              << " does not match matrix columns " << mat.n_cols << '\n';
    std::exit(2);
  }
  const auto model = model_from(model_name, sigma, 1, 0);
  const auto spec = sigma > 0 ? vstcs::vst::VstSpec::gat(sigma, 1, 0, c)
                              : vstcs::vst::VstSpec{
                                    vstcs::vst::VstSpec::Family::anscombe, c,
                                    0, 1, 0};
  const Eigen::VectorXd rates = mat.phi * x;
  const auto stats =
      vstcs::vst::residual_statistics(rates, model, spec, trials, seed);
  nlohmann::json j;
  j["n_trials"] = stats.n_trials;
  j["mean_R"] = stats.mean;
  j["var_R"] = stats.variance;
  j["ks_stat"] = stats.ks_statistic;
  j["ks_reject_1pct"] = stats.ks_reject_1pct;
  j["mean_bound"] = std::sqrt(mat.n_rows / 2.0);
  j["var_bound"] = sigma > 0 ? vstcs::bounds::t3_variance_bound(rates, c, sigma)
                             : vstcs::bounds::t1_variance_bound(rates, c);
  std::cout << j.dump(2) << '\n';
  if (!out.empty()) {
    vstcs::io::write_vector_csv(out, stats.samples);
  }
}

void cmd_reconstruct(const std::string& method, const std::string& matrix_path,
                     const std::string& y_path, std::optional<double> epsilon,
                     std::optional<double> rho, double sigma, double c,
                     const std::string& out_x, const std::string& out_theta,
                     const std::string& truth_path, bool trace,
                     const std::string& trace_path) {
  log_run("reconstruct", 0);
  const auto mat = vstcs::sensing::load_matrix(matrix_path);
  const Eigen::VectorXd y_all = vstcs::io::read_vector_csv(y_path);
  if (y_all.size() != mat.n_rows) {
    std::cerr << "ERR:DIM: y length " << y_all.size()
              << " does not match matrix rows " << mat.n_rows << '\n';
    std::exit(2);
  }
  const bool pg = method == "pg3" || method == "pg5";
  const bool nll = method == "p4";
  const bool constrained = method == "p3" || method == "pg3";
  if (!constrained && !nll && method != "p5" && method != "pg5") {
    throw std::invalid_argument("method must be one of p3,p4,p5,pg3,pg5");
  }
  if (pg && !(sigma > 0)) {
    throw std::invalid_argument(method + " needs --sigma > 0");
  }
  const auto spec = pg ? vstcs::vst::VstSpec::gat(sigma, 1, 0, c)
                       : vstcs::vst::VstSpec{
                             vstcs::vst::VstSpec::Family::anscombe, c, 0, 1, 0};

  // Row selection: saturation rejection for the VST routes, y >= 0 for NLL.
  std::vector<int> keep;
  for (int i = 0; i < y_all.size(); ++i) {
    if (nll ? y_all(i) >= 0 : y_all(i) + spec.offset() >= 0) keep.push_back(i);
  }
  Eigen::MatrixXd phi(keep.size(), mat.n_cols);
  Eigen::VectorXd y(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    phi.row(k) = mat.phi.row(keep[k]);
    y(k) = y_all(keep[k]);
  }

  const auto basis = vstcs::signals::make_dct_basis(mat.n_cols);
  vstcs::solvers::SolverOptions opts;
  opts.record_trace = trace;
  vstcs::solvers::SolverProblem problem{
      phi, basis.matrix, y,
      nll ? vstcs::solvers::Fidelity::poisson_nll : vstcs::solvers::Fidelity::vst,
      nll ? c : spec.offset(), opts};

  vstcs::solvers::SolverResult res;
  if (constrained) {
    const double eps =
        epsilon.value_or(2.0 * std::sqrt(static_cast<double>(y.size())));
    res = vstcs::solvers::solve_constrained(problem, eps);
  } else {
    if (!rho) throw std::invalid_argument(method + " needs --rho");
    res = nll ? vstcs::solvers::solve_poisson_nll(problem, *rho)
              : vstcs::solvers::solve_penalized(problem, *rho);
  }

  if (!out_x.empty()) vstcs::io::write_vector_csv(out_x, res.x_star);
  if (!out_theta.empty()) vstcs::io::write_vector_csv(out_theta, res.theta_star);
  if (trace && !trace_path.empty()) {
    vstcs::solvers::write_trace_csv(trace_path, res.trace);
  }
  nlohmann::json j;
  j["method"] = method;
  j["objective"] = res.objective;
  j["residual"] = res.residual;
  j["iterations"] = res.iterations;
  j["converged"] = res.converged;
  j["infeasible"] = res.infeasible_flag;
  j["rho_used"] = res.rho_used;
  j["retained"] = static_cast<int>(y.size());
  if (!truth_path.empty()) {
    const Eigen::VectorXd x_true = vstcs::io::read_vector_csv(truth_path);
    if (x_true.size() != res.x_star.size()) {
      std::cerr << "ERR:DIM: truth length mismatch\n";
      std::exit(2);
    }
    j["rrmse"] = vstcs::harness::rrmse(x_true, res.x_star);
  }
  std::cout << j.dump(2) << '\n';
}

void cmd_bounds(int n, int m, double intensity, int s, double c, double sigma,
                double kappa, double delta2s, const std::string& model_name) {
  const auto model = model_from(model_name.empty() ? (sigma > 0 ? "pg" : "poisson")
                                                   : model_name,
                                sigma, 1, 0);
  const auto rep = vstcs::bounds::make_bound_report(n, m, intensity, s, c,
                                                    sigma, kappa, delta2s,
                                                    model);
  std::cout << vstcs::bounds::to_json(rep) << '\n';
}

int cmd_experiment(const std::string& config_path, std::optional<std::uint64_t> seed,
                   std::optional<int> threads, std::optional<std::string> out,
                   bool dry_run) {
  ExperimentConfig config = vstcs::harness::parse_config_file(config_path);
  if (seed) config.seed = *seed;
  if (threads) config.threads = *threads;
  if (out) config.output_path = *out;
  if (const char* env = std::getenv("VSTCS_OUT")) config.output_path = env;
  if (dry_run) {
    std::cout << "dry run; resolved configuration:\n"
              << vstcs::harness::describe_config(config);
    return 0;
  }
  return vstcs::harness::run_experiment(config, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed-sensing reconstruction and bound validation under "
               "Poisson and Poisson-Gaussian noise"};
  app.require_subcommand(1);

  // gen-matrix
  int gm_n = 50, gm_m = 100;
  double gm_p = 0.5;
  std::uint64_t gm_seed = 1;
  std::string gm_out;
  bool gm_check = false;
  auto* gen = app.add_subcommand("gen-matrix", "Generate a sensing matrix");
  gen->add_option("--N", gm_n, "rows (measurements)");
  gen->add_option("--m", gm_m, "columns (signal dimension)");
  gen->add_option("--p", gm_p, "zero-entry probability");
  gen->add_option("--seed", gm_seed, "RNG seed");
  gen->add_option("--out", gm_out, "output matrix file");
  gen->add_flag("--check", gm_check, "fail (exit 3) if invariants break");

  // simulate
  std::string sim_matrix, sim_signal, sim_model = "poisson", sim_out = "measurements.csv";
  double sim_sigma = 0, sim_alpha = 1, sim_g = 0, sim_d = 3.0 / 8.0;
  std::uint64_t sim_seed = 1;
  auto* sim = app.add_subcommand("simulate", "Simulate noisy measurements");
  sim->add_option("--matrix", sim_matrix)->required();
  sim->add_option("--signal", sim_signal, "single-column CSV")->required();
  sim->add_option("--model", sim_model, "poisson | pg");
  sim->add_option("--sigma", sim_sigma);
  sim->add_option("--alpha", sim_alpha);
  sim->add_option("--g", sim_g);
  sim->add_option("--d", sim_d, "saturation-rejection offset");
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out", sim_out);

  // residual-stats
  std::string rs_matrix, rs_signal, rs_model = "poisson", rs_out;
  double rs_sigma = 0, rs_c = 3.0 / 8.0;
  int rs_trials = 2000;
  std::uint64_t rs_seed = 1;
  auto* rs = app.add_subcommand("residual-stats",
                                "Monte-Carlo residual-magnitude statistics");
  rs->add_option("--matrix", rs_matrix)->required();
  rs->add_option("--signal", rs_signal)->required();
  rs->add_option("--model", rs_model);
  rs->add_option("--sigma", rs_sigma);
  rs->add_option("--c", rs_c);
  rs->add_option("--trials", rs_trials);
  rs->add_option("--seed", rs_seed);
  rs->add_option("--out", rs_out, "optional CSV of per-trial R samples");

  // reconstruct
  std::string rc_method = "p3", rc_matrix, rc_y, rc_out_x, rc_out_theta,
      rc_truth, rc_trace_path = "trace.csv";
  double rc_sigma = 0, rc_c = 3.0 / 8.0;
  std::optional<double> rc_eps, rc_rho;
  bool rc_trace = false;
  auto* rc = app.add_subcommand("reconstruct", "Single reconstruction from files");
  rc->add_option("--method", rc_method, "p3 | p4 | p5 | pg3 | pg5");
  rc->add_option("--matrix", rc_matrix)->required();
  rc->add_option("--y", rc_y, "measurement CSV (single column)")->required();
  rc->add_option("--epsilon", [&rc_eps](const std::vector<std::string>& v) {
    rc_eps = std::stod(v.back());
    return true;
  }, "constraint bound (default 2 sqrt(N))");
  rc->add_option("--rho", [&rc_rho](const std::vector<std::string>& v) {
    rc_rho = std::stod(v.back());
    return true;
  }, "penalty weight");
  rc->add_option("--sigma", rc_sigma);
  rc->add_option("--c", rc_c);
  rc->add_option("--out-x", rc_out_x);
  rc->add_option("--out-theta", rc_out_theta);
  rc->add_option("--truth", rc_truth, "true signal CSV for RRMSE");
  rc->add_flag("--trace", rc_trace);
  rc->add_option("--trace-out", rc_trace_path);

  // bounds
  int bd_n = 50, bd_m = 100, bd_s = 10;
  double bd_i = 1e8, bd_c = 3.0 / 8.0, bd_sigma = 0, bd_kappa = 2.5,
         bd_delta = 0.2;
  std::string bd_model;
  auto* bd = app.add_subcommand("bounds", "Evaluate the closed-form bounds");
  bd->add_option("--N", bd_n);
  bd->add_option("--m", bd_m);
  bd->add_option("--I", bd_i);
  bd->add_option("--s", bd_s);
  bd->add_option("--c", bd_c);
  bd->add_option("--sigma", bd_sigma);
  bd->add_option("--kappa", bd_kappa);
  bd->add_option("--delta2s", bd_delta);
  bd->add_option("--model", bd_model, "poisson | pg (default from sigma)");

  // experiment
  std::string ex_config;
  std::optional<std::uint64_t> ex_seed;
  std::optional<int> ex_threads;
  std::optional<std::string> ex_out;
  bool ex_dry = false;
  auto* ex = app.add_subcommand("experiment", "Run a config-driven experiment");
  ex->add_option("--config", ex_config)->required();
  ex->add_option("--seed", [&ex_seed](const std::vector<std::string>& v) {
    ex_seed = std::stoull(v.back());
    return true;
  }, "override the config seed");
  ex->add_option("--threads", [&ex_threads](const std::vector<std::string>& v) {
    ex_threads = std::stoi(v.back());
    return true;
  }, "cap the parallel map");
  ex->add_option("--out", [&ex_out](const std::vector<std::string>& v) {
    ex_out = v.back();
    return true;
  }, "override the output directory");
  ex->add_flag("--dry-run", ex_dry, "print the resolved plan and exit");

  // image
  std::string im_path = "synthetic:house256", im_out = "out/image";
  int im_patch = 8, im_n = 32, im_stride = 0, im_threads = 0;
  double im_i = 1e8, im_sigma = 0;
  std::uint64_t im_seed = 1;
  bool im_shared = false;
  auto* im = app.add_subcommand("image", "Patch-wise image reconstruction");
  im->add_option("--image", im_path, "PGM path or synthetic:house<size>");
  im->add_option("--patch", im_patch);
  im->add_option("--n", im_n, "measurements per patch");
  im->add_option("--I", im_i, "total image intensity");
  im->add_option("--sigma", im_sigma);
  im->add_option("--stride", im_stride, "0 = non-overlapping");
  im->add_option("--seed", im_seed);
  im->add_option("--threads", im_threads);
  im->add_option("--out", im_out);
  im->add_flag("--shared-matrix", im_shared, "one matrix for all patches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERR:USAGE: " << e.what() << '\n';
    return 1;
  }

  try {
    if (gen->parsed()) {
      cmd_gen_matrix(gm_n, gm_m, gm_p, gm_seed, gm_out, gm_check);
    } else if (sim->parsed()) {
      cmd_simulate(sim_matrix, sim_signal, sim_model, sim_sigma, sim_alpha,
                   sim_g, sim_d, sim_seed, sim_out);
    } else if (rs->parsed()) {
      cmd_residual_stats(rs_matrix, rs_signal, rs_model, rs_sigma, rs_c,
                         rs_trials, rs_seed, rs_out);
    } else if (rc->parsed()) {
      cmd_reconstruct(rc_method, rc_matrix, rc_y, rc_eps, rc_rho, rc_sigma,
                      rc_c, rc_out_x, rc_out_theta, rc_truth, rc_trace,
                      rc_trace_path);
    } else if (bd->parsed()) {
      cmd_bounds(bd_n, bd_m, bd_i, bd_s, bd_c, bd_sigma, bd_kappa, bd_delta,
                 bd_model);
    } else if (ex->parsed()) {
      return cmd_experiment(ex_config, ex_seed, ex_threads, ex_out, ex_dry);
    } else if (im->parsed()) {
      ExperimentConfig config;
      config.experiment = ExperimentConfig::Kind::image_recon;
      config.image_path = im_path;
      config.patch_side = im_patch;
      config.n_per_patch = im_n;
      config.intensity = im_i;
      config.sigma = im_sigma;
      config.stride = im_stride;
      config.seed = im_seed;
      config.threads = im_threads;
      config.output_path = im_out;
      config.per_patch_matrix = !im_shared;
      if (const char* env = std::getenv("VSTCS_OUT")) config.output_path = env;
      return vstcs::harness::run_experiment(config, std::cerr);
    }
  } catch (const CheckFailure& e) {
    std::cerr << "ERR:CHECK: " << e.message << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "ERR:PARAM: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "ERR:DOMAIN: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ERR:RUNTIME: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
