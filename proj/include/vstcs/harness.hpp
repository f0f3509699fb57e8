#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vstcs::harness {

enum class SweepVariable { N, I, s, sigma };
enum class Method {
  constrained_vst,
  penalized_vst_omniscient,
  nll_omniscient,
  nll_crossval
};

std::string method_name(Method m);

// Parsed form of the key = value experiment configuration file; see the
// README for the full schema.
struct ExperimentConfig {
  enum class Kind { residual_sweep, recon_sweep, bound_validation, image_recon };
  Kind experiment = Kind::residual_sweep;
  std::uint64_t seed = 1;
  std::string output_path = "out";
  int threads = 0;  // 0 = library default

  SweepVariable sweep_variable = SweepVariable::N;
  std::vector<double> sweep_values;

  // fixed parameters
  int m = 100;
  int n_measurements = 50;
  int s = 10;
  double intensity = 1e8;
  double sigma = 0;
  double p = 0.5;
  double c = 3.0 / 8.0;

  // residual sweeps
  int n_trials = 200;
  bool enforce_min_rate = false;

  // reconstruction sweeps
  int q_signals = 20;
  std::vector<Method> methods = {Method::constrained_vst};
  std::optional<double> crossval_anchor;  // default depends on the variable
  bool recompute_epsilon = true;          // use post-rejection N in 2 sqrt(N)
  std::string epsilon_mode = "practical";  // practical | theorem | <number>
  double kappa = 2.5;

  // bound validation
  int ric_seed_budget = 64;
  std::uint64_t ric_budget = 1000000;
  std::string delta_source = "exhaustive";  // exhaustive | hypothesis
  double delta_hypothesis = 0.2;

  // image reconstruction
  std::string image_path = "synthetic:house256";
  int patch_side = 8;
  int n_per_patch = 32;
  int stride = 0;  // 0 -> patch_side (non-overlapping)
  bool per_patch_matrix = true;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_string(const std::string& text);
std::string describe_config(const ExperimentConfig& config);

double rrmse(const Eigen::VectorXd& x_true, const Eigen::VectorXd& x_hat);
double rrmse(const Eigen::MatrixXd& x_true, const Eigen::MatrixXd& x_hat);

struct ResidualRow {
  std::string sweep_name;
  double sweep_value = 0;
  int n_trials = 0;
  double mean_r = 0;
  double var_r = 0;
  double ks_stat = 0;
  bool ks_reject_1pct = false;
  double mean_bound = 0;
  double var_bound = 0;
};

std::vector<ResidualRow> run_residual_sweep(const ExperimentConfig& config);
void write_residual_csv(const std::string& path,
                        const std::vector<ResidualRow>& rows);

struct ExperimentRow {
  double sweep_value = 0;
  std::string method;
  double median_rrmse = 0;
  double q25 = 0;
  double q75 = 0;
  int n_converged = 0;
  double wall_time_s = 0;
};

struct PerSignalRow {
  double sweep_value = 0;
  std::string method;
  int signal_index = 0;
  double rrmse = 0;
  bool converged = false;
  double rho_used = 0;
};

struct ReconOutput {
  std::vector<ExperimentRow> rows;
  std::vector<PerSignalRow> per_signal;
};

ReconOutput run_recon_sweep(const ExperimentConfig& config);
// rows.csv is byte-deterministic; wall-clock timings go to a separate file.
void write_rows_csv(const std::string& path,
                    const std::vector<ExperimentRow>& rows);
void write_timings_csv(const std::string& path,
                       const std::vector<ExperimentRow>& rows);
void write_per_signal_csv(const std::string& path,
                          const std::vector<PerSignalRow>& rows);

struct BoundValidationReport {
  bool applicable = false;  // RIC precondition certified
  bool vacuous = false;     // 1 - kappa^2/N <= 0
  bool passed = false;
  std::string diagnostic;
  std::uint64_t matrix_seed = 0;
  int seeds_tried = 0;
  double delta_2s = 0;
  double best_delta_seen = 0;
  double intensity_used = 0;
  double epsilon_used = 0;
  double rre_bound = 0;
  int n_trials = 0;
  double coverage = 0;
  double threshold = 0;
};

BoundValidationReport run_bound_validation(const ExperimentConfig& config);
std::string to_json(const BoundValidationReport& report);

struct ImageReconResult {
  Eigen::MatrixXd original;       // intensity-scaled reference
  Eigen::MatrixXd reconstructed;  // intensity scale
  double rrmse = 0;
  int n_patches = 0;
  int n_converged = 0;
  double pixel_sum = 0;  // original pixel-domain sum, for PGM rescaling
  int maxval = 255;
};

ImageReconResult run_image_recon(const ExperimentConfig& config);

// Deterministic piecewise-smooth 256-class test scene (sky, roof, walls,
// windows); compressible but not sparse in the 2D DCT basis.
Eigen::MatrixXd synthetic_house_image(int size = 256);

// Dispatches on config.experiment, writes all outputs under
// config.output_path, and logs progress. Returns 0 on success, 3 when a
// requested statistical check fails (bound-validation coverage), 2 when an
// experiment aborts on an unmet precondition.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

}  // namespace vstcs::harness
