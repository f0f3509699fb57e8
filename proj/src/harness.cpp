#include "vstcs/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vstcs/bounds.hpp"
#include "vstcs/io.hpp"
#include "vstcs/noise.hpp"
#include "vstcs/rng.hpp"
#include "vstcs/sensing.hpp"
#include "vstcs/signals.hpp"
#include "vstcs/solvers.hpp"
#include "vstcs/vst.hpp"

namespace vstcs::harness {

namespace {

constexpr std::uint64_t kMatTag = 0x4D415452u;
constexpr std::uint64_t kSigTag = 0x5349474Eu;
constexpr std::uint64_t kNoiseTag = 0x4E4F4953u;
constexpr std::uint64_t kTrialsTag = 0x54524C53u;
constexpr std::uint64_t kAnchorRow = 0xA11C0000u;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ' ' || ch == '\t' || ch == ',') {
      if (!cur.empty()) out.push_back(cur), cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

Method parse_method(const std::string& name) {
  if (name == "constrained_vst") return Method::constrained_vst;
  if (name == "penalized_vst_omniscient") return Method::penalized_vst_omniscient;
  if (name == "nll_omniscient") return Method::nll_omniscient;
  if (name == "nll_crossval") return Method::nll_crossval;
  throw std::invalid_argument("config: unknown method " + name);
}

SweepVariable parse_variable(const std::string& name) {
  if (name == "N") return SweepVariable::N;
  if (name == "I") return SweepVariable::I;
  if (name == "s") return SweepVariable::s;
  if (name == "sigma") return SweepVariable::sigma;
  throw std::invalid_argument("config: unknown sweep variable " + name);
}

std::string variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::N: return "N";
    case SweepVariable::I: return "I";
    case SweepVariable::s: return "s";
    case SweepVariable::sigma: return "sigma";
  }
  return "?";
}

// Parameters of one sweep row after substituting the swept variable.
struct RowParams {
  int n_measurements;
  int s;
  double intensity;
  double sigma;
};

RowParams row_params(const ExperimentConfig& c, double value) {
  RowParams r{c.n_measurements, c.s, c.intensity, c.sigma};
  switch (c.sweep_variable) {
    case SweepVariable::N: r.n_measurements = static_cast<int>(value); break;
    case SweepVariable::I: r.intensity = value; break;
    case SweepVariable::s: r.s = static_cast<int>(value); break;
    case SweepVariable::sigma: r.sigma = value; break;
  }
  return r;
}

noise::NoiseModel model_for(double sigma) {
  return sigma > 0 ? noise::NoiseModel::poisson_gaussian(sigma)
                   : noise::NoiseModel::poisson();
}

vst::VstSpec spec_for(double sigma, double c) {
  return sigma > 0 ? vst::VstSpec::gat(sigma, 1, 0, c)
                   : vst::VstSpec{vst::VstSpec::Family::anscombe, c, 0, 1, 0};
}

// Retained-row views after saturation rejection.
struct RetainedData {
  Eigen::MatrixXd phi;
  Eigen::VectorXd y;
};

RetainedData retained_rows(const Eigen::MatrixXd& phi,
                           const noise::MeasurementSet& meas) {
  RetainedData out;
  const int keep = meas.n_retained();
  out.phi.resize(keep, phi.cols());
  out.y.resize(keep);
  int k = 0;
  for (int i = 0; i < meas.n_total(); ++i) {
    if (meas.is_rejected(i)) continue;
    out.phi.row(k) = phi.row(i);
    out.y(k) = meas.y(i);
    ++k;
  }
  return out;
}

RetainedData nonnegative_rows(const Eigen::MatrixXd& phi,
                              const noise::MeasurementSet& meas) {
  RetainedData out;
  int keep = 0;
  for (int i = 0; i < meas.n_total(); ++i) {
    if (meas.y(i) >= 0) ++keep;
  }
  out.phi.resize(keep, phi.cols());
  out.y.resize(keep);
  int k = 0;
  for (int i = 0; i < meas.n_total(); ++i) {
    if (meas.y(i) < 0) continue;
    out.phi.row(k) = phi.row(i);
    out.y(k) = meas.y(i);
    ++k;
  }
  return out;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

template <class F>
void parallel_units(int n, F&& f) {
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) f(i);
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::constrained_vst: return "constrained_vst";
    case Method::penalized_vst_omniscient: return "penalized_vst_omniscient";
    case Method::nll_omniscient: return "nll_omniscient";
    case Method::nll_crossval: return "nll_crossval";
  }
  return "?";
}

ExperimentConfig parse_config_string(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  bool have_methods = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string qual = section.empty() ? key : section + "." + key;

    if (qual == "experiment") {
      if (val == "residual_sweep") c.experiment = ExperimentConfig::Kind::residual_sweep;
      else if (val == "recon_sweep") c.experiment = ExperimentConfig::Kind::recon_sweep;
      else if (val == "bound_validation") c.experiment = ExperimentConfig::Kind::bound_validation;
      else if (val == "image_recon") c.experiment = ExperimentConfig::Kind::image_recon;
      else throw std::invalid_argument("config: unknown experiment " + val);
    } else if (qual == "seed") {
      c.seed = std::stoull(val);
    } else if (qual == "output") {
      c.output_path = val;
    } else if (qual == "threads") {
      c.threads = std::stoi(val);
    } else if (qual == "sweep.variable") {
      c.sweep_variable = parse_variable(val);
    } else if (qual == "sweep.values") {
      c.sweep_values.clear();
      for (const auto& tok : split_list(val)) c.sweep_values.push_back(std::stod(tok));
    } else if (qual == "fixed.m") {
      c.m = std::stoi(val);
    } else if (qual == "fixed.N") {
      c.n_measurements = std::stoi(val);
    } else if (qual == "fixed.s") {
      c.s = std::stoi(val);
    } else if (qual == "fixed.I") {
      c.intensity = std::stod(val);
    } else if (qual == "fixed.sigma") {
      c.sigma = std::stod(val);
    } else if (qual == "fixed.p") {
      c.p = std::stod(val);
    } else if (qual == "fixed.c") {
      c.c = std::stod(val);
    } else if (qual == "residual.n_trials" || qual == "bound.n_trials") {
      c.n_trials = std::stoi(val);
    } else if (qual == "residual.enforce_min_rate") {
      c.enforce_min_rate = parse_bool(val, qual);
    } else if (qual == "recon.q_signals") {
      c.q_signals = std::stoi(val);
    } else if (qual == "recon.methods") {
      c.methods.clear();
      for (const auto& tok : split_list(val)) c.methods.push_back(parse_method(tok));
      have_methods = true;
    } else if (qual == "recon.crossval_anchor") {
      c.crossval_anchor = std::stod(val);
    } else if (qual == "recon.recompute_epsilon") {
      c.recompute_epsilon = parse_bool(val, qual);
    } else if (qual == "recon.epsilon_mode") {
      c.epsilon_mode = val;
    } else if (qual == "recon.kappa" || qual == "bound.kappa") {
      c.kappa = std::stod(val);
    } else if (qual == "bound.ric_seed_budget") {
      c.ric_seed_budget = std::stoi(val);
    } else if (qual == "bound.ric_budget") {
      c.ric_budget = std::stoull(val);
    } else if (qual == "bound.delta_source") {
      if (val != "exhaustive" && val != "hypothesis") {
        throw std::invalid_argument("config: delta_source must be exhaustive|hypothesis");
      }
      c.delta_source = val;
    } else if (qual == "bound.delta_hypothesis") {
      c.delta_hypothesis = std::stod(val);
    } else if (qual == "image.path") {
      c.image_path = val;
    } else if (qual == "image.patch_side") {
      c.patch_side = std::stoi(val);
    } else if (qual == "image.n_per_patch") {
      c.n_per_patch = std::stoi(val);
    } else if (qual == "image.stride") {
      c.stride = std::stoi(val);
    } else if (qual == "image.per_patch_matrix") {
      c.per_patch_matrix = parse_bool(val, qual);
    } else {
      throw std::invalid_argument("config: unknown key " + qual);
    }
  }
  if (c.sweep_values.size() > 1) {
    for (std::size_t i = 1; i < c.sweep_values.size(); ++i) {
      if (!(c.sweep_values[i] > c.sweep_values[i - 1])) {
        throw std::invalid_argument("config: sweep values must be strictly increasing");
      }
    }
  }
  if (c.q_signals < 1) throw std::invalid_argument("config: q_signals >= 1");
  (void)have_methods;
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

std::string describe_config(const ExperimentConfig& c) {
  std::ostringstream os;
  const char* kinds[] = {"residual_sweep", "recon_sweep", "bound_validation",
                         "image_recon"};
  os << "experiment = " << kinds[static_cast<int>(c.experiment)] << '\n'
     << "seed = " << c.seed << '\n'
     << "output = " << c.output_path << '\n'
     << "threads = " << c.threads << '\n'
     << "sweep: variable = " << variable_name(c.sweep_variable) << ", values =";
  for (double v : c.sweep_values) os << ' ' << io::format_double(v);
  os << '\n'
     << "fixed: m = " << c.m << ", N = " << c.n_measurements << ", s = " << c.s
     << ", I = " << io::format_double(c.intensity)
     << ", sigma = " << io::format_double(c.sigma)
     << ", p = " << io::format_double(c.p)
     << ", c = " << io::format_double(c.c) << '\n'
     << "n_trials = " << c.n_trials << ", q_signals = " << c.q_signals
     << ", kappa = " << io::format_double(c.kappa) << '\n'
     << "methods =";
  for (Method m : c.methods) os << ' ' << method_name(m);
  os << '\n';
  return os.str();
}

double rrmse(const Eigen::VectorXd& x_true, const Eigen::VectorXd& x_hat) {
  if (x_true.size() != x_hat.size()) {
    throw std::invalid_argument("rrmse: dimension mismatch");
  }
  const double denom = x_true.norm();
  if (!(denom > 0)) throw std::invalid_argument("rrmse: zero true signal");
  return (x_true - x_hat).norm() / denom;
}

double rrmse(const Eigen::MatrixXd& x_true, const Eigen::MatrixXd& x_hat) {
  if (x_true.rows() != x_hat.rows() || x_true.cols() != x_hat.cols()) {
    throw std::invalid_argument("rrmse: dimension mismatch");
  }
  const double denom = x_true.norm();
  if (!(denom > 0)) throw std::invalid_argument("rrmse: zero true signal");
  return (x_true - x_hat).norm() / denom;
}

std::vector<ResidualRow> run_residual_sweep(const ExperimentConfig& config) {
  if (config.sweep_values.empty()) {
    throw std::invalid_argument("residual sweep: empty sweep values");
  }
  const std::string name = variable_name(config.sweep_variable);
  // Phi and the signal shape stay fixed across rows unless the row changes N.
  const bool regen_matrix = config.sweep_variable == SweepVariable::N;
  sensing::SensingMatrix shared_mat;
  if (!regen_matrix) {
    shared_mat = sensing::generate_sensing_matrix(
        config.n_measurements, config.m, config.p,
        rng::derive_key(config.seed, kMatTag, 0));
  }
  const Eigen::VectorXd base_x =
      signals::uniform_signal(config.m, 1.0, rng::derive_key(config.seed, kSigTag, 0));

  std::vector<ResidualRow> rows(config.sweep_values.size());
  for (std::size_t r = 0; r < config.sweep_values.size(); ++r) {
    const RowParams rp = row_params(config, config.sweep_values[r]);
    const sensing::SensingMatrix mat =
        regen_matrix ? sensing::generate_sensing_matrix(
                           rp.n_measurements, config.m, config.p,
                           rng::derive_key(config.seed, kMatTag, r))
                     : shared_mat;
    Eigen::VectorXd rates = mat.phi * (rp.intensity * base_x);
    if (config.enforce_min_rate) {
      const double lo = rates.minCoeff();
      if (!(lo > 0)) {
        throw std::runtime_error("residual sweep: cannot enforce Phi x >= 1");
      }
      if (lo < 1.0) rates *= 1.0 / lo;
    }
    const noise::NoiseModel model = model_for(rp.sigma);
    const vst::VstSpec spec = spec_for(rp.sigma, config.c);
    const vst::ResidualStats stats = vst::residual_statistics(
        rates, model, spec, config.n_trials,
        rng::derive_key(config.seed, kTrialsTag, r));

    ResidualRow row;
    row.sweep_name = name;
    row.sweep_value = config.sweep_values[r];
    row.n_trials = config.n_trials;
    row.mean_r = stats.mean;
    row.var_r = stats.variance;
    row.ks_stat = stats.ks_statistic;
    row.ks_reject_1pct = stats.ks_reject_1pct;
    row.mean_bound = std::sqrt(rp.n_measurements / 2.0);
    row.var_bound = rp.sigma > 0
                        ? bounds::t3_variance_bound(rates, config.c, rp.sigma)
                        : bounds::t1_variance_bound(rates, config.c);
    rows[r] = row;
  }
  return rows;
}

void write_residual_csv(const std::string& path,
                        const std::vector<ResidualRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_residual_csv: cannot open " + path);
  out << "sweep_name,sweep_value,n_trials,mean_R,var_R,ks_stat,"
         "ks_reject_1pct,mean_bound,var_bound\n";
  for (const auto& r : rows) {
    out << r.sweep_name << ',' << io::format_double(r.sweep_value) << ','
        << r.n_trials << ',' << io::format_double(r.mean_r) << ','
        << io::format_double(r.var_r) << ',' << io::format_double(r.ks_stat)
        << ',' << (r.ks_reject_1pct ? 1 : 0) << ','
        << io::format_double(r.mean_bound) << ','
        << io::format_double(r.var_bound) << '\n';
  }
}

namespace {

struct MethodOutcome {
  double rrmse = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  double rho_used = 0;
  double seconds = 0;
};

double default_anchor(SweepVariable v) {
  switch (v) {
    case SweepVariable::I: return 1e4;
    case SweepVariable::s: return 30;
    case SweepVariable::N: return 20;
    case SweepVariable::sigma: return 20;
  }
  return 0;
}

double resolve_epsilon(const ExperimentConfig& config, int n_retained,
                       int n_total, double sigma) {
  const int n_eff = config.recompute_epsilon ? n_retained : n_total;
  if (config.epsilon_mode == "practical") {
    return 2.0 * std::sqrt(static_cast<double>(n_eff));
  }
  if (config.epsilon_mode == "theorem") {
    const noise::NoiseModel model = model_for(sigma);
    return bounds::epsilon_bound(n_eff, config.kappa, model, config.c)
        .theorem_eps;
  }
  return std::stod(config.epsilon_mode);
}

struct ReconContext {
  const ExperimentConfig* config;
  signals::OrthoBasis basis;
  std::vector<sensing::SensingMatrix> row_mats;  // one per row, or size 1
  bool per_row_matrix = false;
};

const sensing::SensingMatrix& matrix_for_row(const ReconContext& ctx,
                                             std::size_t r) {
  return ctx.per_row_matrix ? ctx.row_mats[r] : ctx.row_mats[0];
}

// Solves one (row, signal, method) cell on a shared measurement draw.
MethodOutcome run_method(const ReconContext& ctx, Method method,
                         const RowParams& rp,
                         const sensing::SensingMatrix& mat,
                         const signals::SparseSignal& sig,
                         const noise::MeasurementSet& meas,
                         double crossval_rho) {
  const ExperimentConfig& config = *ctx.config;
  MethodOutcome out;
  const auto t0 = Clock::now();
  const vst::VstSpec spec = spec_for(rp.sigma, config.c);

  solvers::SolverResult result;
  if (method == Method::constrained_vst ||
      method == Method::penalized_vst_omniscient) {
    const noise::MeasurementSet rejected =
        noise::saturation_reject(meas, spec.offset());
    const RetainedData data = retained_rows(mat.phi, rejected);
    solvers::SolverProblem problem{data.phi,          ctx.basis.matrix,
                                   data.y,            solvers::Fidelity::vst,
                                   spec.offset(),     {}};
    if (method == Method::constrained_vst) {
      const double eps = resolve_epsilon(config, static_cast<int>(data.y.size()),
                                         meas.n_total(), rp.sigma);
      result = solvers::solve_constrained(problem, eps);
    } else {
      result = solvers::omniscient_rho(problem, sig.theta,
                                       solvers::rho_sweep_set())
                   .best_result;
    }
  } else {
    const RetainedData data = nonnegative_rows(mat.phi, meas);
    solvers::SolverProblem problem{data.phi,
                                   ctx.basis.matrix,
                                   data.y,
                                   solvers::Fidelity::poisson_nll,
                                   config.c,
                                   {}};
    if (method == Method::nll_omniscient) {
      result = solvers::omniscient_rho(problem, sig.theta,
                                       solvers::rho_sweep_set())
                   .best_result;
    } else {
      result = solvers::solve_poisson_nll(problem, crossval_rho);
    }
  }
  out.rrmse = rrmse(sig.x, result.x_star);
  out.converged = result.converged;
  out.rho_used = result.rho_used;
  out.seconds = seconds_since(t0);
  return out;
}

signals::SparseSignal signal_for(const ExperimentConfig& config,
                                 const RowParams& rp,
                                 const signals::OrthoBasis& basis,
                                 std::size_t row_key, int q) {
  // The signal draw (support and values) is shared across rows unless s
  // changes with the row; intensity only rescales the same draw.
  const std::uint64_t key =
      config.sweep_variable == SweepVariable::s
          ? rng::derive_key(config.seed, kSigTag, row_key, q + 1)
          : rng::derive_key(config.seed, kSigTag, 0, q + 1);
  return signals::generate_sparse_signal(config.m, rp.s, rp.intensity, basis,
                                         key);
}

// Cross-validation anchor: one rho (per the paper's protocol) picked by the
// omniscient rule on the median RRMSE at the anchor parameter value.
double crossval_anchor_rho(const ReconContext& ctx) {
  const ExperimentConfig& config = *ctx.config;
  const double anchor_value =
      config.crossval_anchor.value_or(default_anchor(config.sweep_variable));
  const RowParams rp = row_params(config, anchor_value);
  const sensing::SensingMatrix anchor_mat =
      ctx.per_row_matrix
          ? sensing::generate_sensing_matrix(
                rp.n_measurements, config.m, config.p,
                rng::derive_key(config.seed, kMatTag, kAnchorRow))
          : ctx.row_mats[0];

  const std::vector<double> sweep = solvers::rho_sweep_set();
  const int q_count = config.q_signals;
  const int units = static_cast<int>(sweep.size()) * q_count;
  std::vector<double> errs(units, std::numeric_limits<double>::infinity());
  parallel_units(units, [&](int unit) {
    const int rho_idx = unit / q_count;
    const int q = unit % q_count;
    const signals::SparseSignal sig =
        signal_for(config, rp, ctx.basis, kAnchorRow, q);
    const noise::MeasurementSet meas = noise::sample_measurements(
        anchor_mat, sig.x, model_for(rp.sigma),
        rng::derive_key(config.seed, kNoiseTag, kAnchorRow, q));
    const RetainedData data = nonnegative_rows(anchor_mat.phi, meas);
    solvers::SolverProblem problem{data.phi,
                                   ctx.basis.matrix,
                                   data.y,
                                   solvers::Fidelity::poisson_nll,
                                   config.c,
                                   {}};
    const solvers::SolverResult res =
        solvers::solve_poisson_nll(problem, sweep[rho_idx]);
    errs[unit] = rrmse(sig.x, res.x_star);
  });

  double best_rho = sweep[0];
  double best_median = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    std::vector<double> col(errs.begin() + i * q_count,
                            errs.begin() + (i + 1) * q_count);
    const double med = quantile(col, 0.5);
    if (med < best_median) {
      best_median = med;
      best_rho = sweep[i];
    }
  }
  return best_rho;
}

}  // namespace

ReconOutput run_recon_sweep(const ExperimentConfig& config) {
  if (config.sweep_values.empty()) {
    throw std::invalid_argument("recon sweep: empty sweep values");
  }
  if (config.methods.empty()) {
    throw std::invalid_argument("recon sweep: no methods requested");
  }
  ReconContext ctx;
  ctx.config = &config;
  ctx.basis = signals::make_dct_basis(config.m);
  ctx.per_row_matrix = config.sweep_variable == SweepVariable::N;
  if (ctx.per_row_matrix) {
    for (std::size_t r = 0; r < config.sweep_values.size(); ++r) {
      const RowParams rp = row_params(config, config.sweep_values[r]);
      ctx.row_mats.push_back(sensing::generate_sensing_matrix(
          rp.n_measurements, config.m, config.p,
          rng::derive_key(config.seed, kMatTag, r)));
    }
  } else {
    ctx.row_mats.push_back(sensing::generate_sensing_matrix(
        config.n_measurements, config.m, config.p,
        rng::derive_key(config.seed, kMatTag, 0)));
  }

  double crossval_rho = 0;
  if (std::find(config.methods.begin(), config.methods.end(),
                Method::nll_crossval) != config.methods.end()) {
    crossval_rho = crossval_anchor_rho(ctx);
  }

  const int n_rows = static_cast<int>(config.sweep_values.size());
  const int n_methods = static_cast<int>(config.methods.size());
  const int q_count = config.q_signals;
  std::vector<MethodOutcome> grid(
      static_cast<std::size_t>(n_rows) * q_count * n_methods);

  parallel_units(n_rows * q_count, [&](int unit) {
    const int r = unit / q_count;
    const int q = unit % q_count;
    const RowParams rp = row_params(config, config.sweep_values[r]);
    const sensing::SensingMatrix& mat = matrix_for_row(ctx, r);
    const signals::SparseSignal sig = signal_for(config, rp, ctx.basis, r, q);
    const noise::MeasurementSet meas = noise::sample_measurements(
        mat, sig.x, model_for(rp.sigma),
        rng::derive_key(config.seed, kNoiseTag, r, q));
    for (int mi = 0; mi < n_methods; ++mi) {
      grid[(static_cast<std::size_t>(r) * q_count + q) * n_methods + mi] =
          run_method(ctx, config.methods[mi], rp, mat, sig, meas,
                     crossval_rho);
    }
  });

  ReconOutput out;
  for (int r = 0; r < n_rows; ++r) {
    for (int mi = 0; mi < n_methods; ++mi) {
      std::vector<double> errs;
      int converged = 0;
      double secs = 0;
      for (int q = 0; q < q_count; ++q) {
        const MethodOutcome& mo =
            grid[(static_cast<std::size_t>(r) * q_count + q) * n_methods + mi];
        errs.push_back(mo.rrmse);
        converged += mo.converged ? 1 : 0;
        secs += mo.seconds;
        PerSignalRow ps;
        ps.sweep_value = config.sweep_values[r];
        ps.method = method_name(config.methods[mi]);
        ps.signal_index = q;
        ps.rrmse = mo.rrmse;
        ps.converged = mo.converged;
        ps.rho_used = mo.rho_used;
        out.per_signal.push_back(ps);
      }
      ExperimentRow row;
      row.sweep_value = config.sweep_values[r];
      row.method = method_name(config.methods[mi]);
      row.median_rrmse = quantile(errs, 0.5);
      row.q25 = quantile(errs, 0.25);
      row.q75 = quantile(errs, 0.75);
      row.n_converged = converged;
      row.wall_time_s = secs;
      out.rows.push_back(row);
    }
  }
  return out;
}

void write_rows_csv(const std::string& path,
                    const std::vector<ExperimentRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_rows_csv: cannot open " + path);
  out << "sweep_value,method,median_rrmse,q25,q75,n_converged\n";
  for (const auto& r : rows) {
    out << io::format_double(r.sweep_value) << ',' << r.method << ','
        << io::format_double(r.median_rrmse) << ',' << io::format_double(r.q25)
        << ',' << io::format_double(r.q75) << ',' << r.n_converged << '\n';
  }
}

void write_timings_csv(const std::string& path,
                       const std::vector<ExperimentRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_timings_csv: cannot open " + path);
  out << "sweep_value,method,wall_time_s\n";
  for (const auto& r : rows) {
    out << io::format_double(r.sweep_value) << ',' << r.method << ','
        << io::format_double(r.wall_time_s) << '\n';
  }
}

void write_per_signal_csv(const std::string& path,
                          const std::vector<PerSignalRow>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_per_signal_csv: cannot open " + path);
  }
  out << "sweep_value,method,signal_index,rrmse,converged,rho_used\n";
  for (const auto& r : rows) {
    out << io::format_double(r.sweep_value) << ',' << r.method << ','
        << r.signal_index << ',' << io::format_double(r.rrmse) << ','
        << (r.converged ? 1 : 0) << ',' << io::format_double(r.rho_used)
        << '\n';
  }
}

BoundValidationReport run_bound_validation(const ExperimentConfig& config) {
  BoundValidationReport rep;
  rep.n_trials = config.n_trials;
  const signals::OrthoBasis basis = signals::make_dct_basis(config.m);

  // Certify (or assume) the restricted-isometry precondition.
  sensing::SensingMatrix mat;
  rep.best_delta_seen = std::numeric_limits<double>::infinity();
  if (config.delta_source == "hypothesis") {
    mat = sensing::generate_sensing_matrix(
        config.n_measurements, config.m, config.p,
        rng::derive_key(config.seed, kMatTag, 0));
    rep.delta_2s = config.delta_hypothesis;
    rep.matrix_seed = mat.seed;
    rep.seeds_tried = 1;
    rep.applicable = rep.delta_2s < bounds::kRicLimit;
    rep.best_delta_seen = rep.delta_2s;
  } else {
    for (int k = 0; k < config.ric_seed_budget; ++k) {
      const std::uint64_t mseed = rng::derive_key(config.seed, kMatTag, k);
      sensing::SensingMatrix cand = sensing::generate_sensing_matrix(
          config.n_measurements, config.m, config.p, mseed);
      const sensing::RicEstimate est = sensing::estimate_ric(
          cand, basis.matrix, config.s, sensing::RicMode::exhaustive,
          config.ric_budget, config.seed);
      rep.seeds_tried = k + 1;
      if (est.delta_lower < rep.best_delta_seen) {
        rep.best_delta_seen = est.delta_lower;
        rep.delta_2s = est.delta_lower;
        rep.matrix_seed = mseed;
        mat = std::move(cand);
      }
      if (rep.best_delta_seen < bounds::kRicLimit) {
        rep.applicable = true;
        break;
      }
    }
  }
  if (!rep.applicable) {
    std::ostringstream os;
    os << "bound not applicable: no matrix with delta_" << 2 * config.s
       << " < sqrt(2)-1 found in " << rep.seeds_tried
       << " seeds (best delta = " << rep.best_delta_seen << ")";
    rep.diagnostic = os.str();
    return rep;
  }

  // Signal with Phi x >= 1 enforced through the intensity.
  signals::SparseSignal sig = signals::generate_sparse_signal(
      config.m, config.s, config.intensity, basis,
      rng::derive_key(config.seed, kSigTag, 0));
  {
    const double lo = (mat.phi * sig.x).minCoeff();
    if (!(lo > 0)) {
      rep.diagnostic = "bound not applicable: Phi x has a zero rate";
      rep.applicable = false;
      return rep;
    }
    if (lo < 1.0) {
      const double f = 1.0 / lo;
      sig.x *= f;
      sig.theta *= f;
      sig.intensity *= f;
    }
  }
  rep.intensity_used = sig.intensity;

  const double eps =
      bounds::epsilon_bound(config.n_measurements, config.kappa,
                            noise::NoiseModel::poisson(), config.c)
          .theorem_eps;
  rep.epsilon_used = eps;
  rep.rre_bound = bounds::t2_rre_bound(config.n_measurements, sig.intensity,
                                       config.s, config.c, rep.delta_2s,
                                       config.kappa, sig.theta);

  const int trials = config.n_trials;
  std::vector<char> covered(trials, 0);
  parallel_units(trials, [&](int t) {
    const noise::MeasurementSet meas = noise::sample_measurements(
        mat, sig.x, noise::NoiseModel::poisson(),
        rng::derive_key(config.seed, kNoiseTag, t));
    solvers::SolverProblem problem{mat.phi,       basis.matrix,
                                   meas.y,        solvers::Fidelity::vst,
                                   config.c,      {}};
    const solvers::SolverResult res = solvers::solve_constrained(problem, eps);
    const double rre = (sig.theta - res.theta_star).norm() / sig.intensity;
    covered[t] = rre <= rep.rre_bound ? 1 : 0;
  });
  int hits = 0;
  for (char c : covered) hits += c;
  rep.coverage = static_cast<double>(hits) / trials;

  const double prob = 1.0 - config.kappa * config.kappa / config.n_measurements;
  if (prob <= 0) {
    rep.vacuous = true;
    rep.passed = true;
    rep.threshold = 0;
    rep.diagnostic = "vacuous: 1 - kappa^2/N <= 0";
    return rep;
  }
  const double se = std::sqrt(prob * (1.0 - prob) / trials);
  rep.threshold = prob - 3.0 * se;
  rep.passed = rep.coverage >= rep.threshold;
  rep.diagnostic = rep.passed ? "coverage within the theorem guarantee"
                              : "coverage below the theorem guarantee";
  return rep;
}

std::string to_json(const BoundValidationReport& r) {
  nlohmann::json j;
  j["applicable"] = r.applicable;
  j["vacuous"] = r.vacuous;
  j["passed"] = r.passed;
  j["diagnostic"] = r.diagnostic;
  j["matrix_seed"] = r.matrix_seed;
  j["seeds_tried"] = r.seeds_tried;
  j["delta_2s"] = r.delta_2s;
  j["best_delta_seen"] = r.best_delta_seen;
  j["intensity_used"] = r.intensity_used;
  j["epsilon_used"] = r.epsilon_used;
  j["rre_bound"] = r.rre_bound;
  j["n_trials"] = r.n_trials;
  j["coverage"] = r.coverage;
  j["threshold"] = r.threshold;
  return j.dump(2);
}

Eigen::MatrixXd synthetic_house_image(int size) {
  if (size < 32) throw std::invalid_argument("synthetic_house_image: size >= 32");
  Eigen::MatrixXd img(size, size);
  const double n = size;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double y = r / n, x = c / n;
      double v = 175.0 - 55.0 * y;  // sky gradient
      // sun
      const double dx = x - 0.78, dy = y - 0.16;
      if (dx * dx + dy * dy < 0.07 * 0.07) v = 238.0;
      // ground
      if (y > 0.82) v = 92.0 + 9.0 * std::sin(40.0 * x) * std::sin(9.0 * y);
      // house body
      if (y > 0.46 && y <= 0.82 && x > 0.22 && x < 0.62) v = 150.0;
      // roof (triangle)
      if (y > 0.30 && y <= 0.46) {
        const double half = 0.24 * (y - 0.30) / 0.16;
        if (std::abs(x - 0.42) < half) v = 108.0;
      }
      // chimney
      if (y > 0.20 && y <= 0.34 && x > 0.50 && x < 0.55) v = 120.0;
      // door
      if (y > 0.62 && y <= 0.82 && x > 0.38 && x < 0.47) v = 58.0;
      // windows
      if (y > 0.52 && y <= 0.60 && x > 0.26 && x < 0.34) v = 215.0;
      if (y > 0.52 && y <= 0.60 && x > 0.50 && x < 0.58) v = 215.0;
      img(r, c) = v;
    }
  }
  return img;
}

ImageReconResult run_image_recon(const ExperimentConfig& config) {
  Eigen::MatrixXd pixels;
  int maxval = 255;
  if (config.image_path.rfind("synthetic:house", 0) == 0) {
    const std::string rest = config.image_path.substr(15);
    pixels = synthetic_house_image(rest.empty() ? 256 : std::stoi(rest));
  } else {
    const io::PgmImage img = io::read_pgm(config.image_path);
    pixels = img.pixels;
    maxval = img.maxval;
  }
  const double pixel_sum = pixels.sum();
  if (!(pixel_sum > 0)) throw std::runtime_error("image_recon: empty image");
  const int stride = config.stride > 0 ? config.stride : config.patch_side;

  ImageReconResult out;
  out.maxval = maxval;
  out.pixel_sum = pixel_sum;
  out.original = pixels * (config.intensity / pixel_sum);

  const std::vector<Eigen::VectorXd> patches =
      signals::extract_patches(out.original, config.patch_side, stride);
  const signals::OrthoBasis basis = signals::make_dct2d_basis(config.patch_side);
  const int n_patches = static_cast<int>(patches.size());
  out.n_patches = n_patches;

  sensing::SensingMatrix shared_mat;
  if (!config.per_patch_matrix) {
    shared_mat = sensing::generate_sensing_matrix(
        config.n_per_patch, basis.dim, config.p,
        rng::derive_key(config.seed, kMatTag, 0));
  }
  const vst::VstSpec spec = spec_for(config.sigma, config.c);
  const noise::NoiseModel model = model_for(config.sigma);

  std::vector<Eigen::VectorXd> recon(patches.size());
  std::vector<char> conv(patches.size(), 0);
  parallel_units(n_patches, [&](int i) {
    const sensing::SensingMatrix mat =
        config.per_patch_matrix
            ? sensing::generate_sensing_matrix(
                  config.n_per_patch, basis.dim, config.p,
                  rng::derive_key(config.seed, kMatTag, i))
            : shared_mat;
    const noise::MeasurementSet meas = noise::sample_measurements(
        mat, patches[i], model, rng::derive_key(config.seed, kNoiseTag, i));
    const noise::MeasurementSet rejected =
        noise::saturation_reject(meas, spec.offset());
    const RetainedData data = retained_rows(mat.phi, rejected);
    const double eps = resolve_epsilon(config, static_cast<int>(data.y.size()),
                                       meas.n_total(), config.sigma);
    solvers::SolverProblem problem{data.phi,          basis.matrix,
                                   data.y,            solvers::Fidelity::vst,
                                   spec.offset(),     {}};
    const solvers::SolverResult res = solvers::solve_constrained(problem, eps);
    recon[i] = res.x_star;
    conv[i] = res.converged ? 1 : 0;
  });
  for (char c : conv) out.n_converged += c;

  out.reconstructed = signals::assemble_patches(
      recon, static_cast<int>(pixels.rows()), static_cast<int>(pixels.cols()),
      config.patch_side, stride);
  out.rrmse = rrmse(out.original, out.reconstructed);
  return out;
}

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  if (config.threads > 0) omp_set_num_threads(config.threads);
  std::filesystem::create_directories(config.output_path);
  const auto path = [&](const std::string& f) {
    return (std::filesystem::path(config.output_path) / f).string();
  };
  log << "resolved configuration:\n" << describe_config(config);

  switch (config.experiment) {
    case ExperimentConfig::Kind::residual_sweep: {
      const auto rows = run_residual_sweep(config);
      write_residual_csv(path("rows.csv"), rows);
      log << "wrote " << rows.size() << " rows to " << path("rows.csv") << '\n';
      return 0;
    }
    case ExperimentConfig::Kind::recon_sweep: {
      const ReconOutput out = run_recon_sweep(config);
      write_rows_csv(path("rows.csv"), out.rows);
      write_per_signal_csv(path("per_signal.csv"), out.per_signal);
      write_timings_csv(path("timings.csv"), out.rows);
      log << "wrote " << out.rows.size() << " rows to " << path("rows.csv")
          << '\n';
      return 0;
    }
    case ExperimentConfig::Kind::bound_validation: {
      const BoundValidationReport rep = run_bound_validation(config);
      std::ofstream f(path("bound_report.json"));
      f << to_json(rep) << '\n';
      log << rep.diagnostic << '\n';
      if (!rep.applicable) return 2;
      return rep.passed ? 0 : 3;
    }
    case ExperimentConfig::Kind::image_recon: {
      const ImageReconResult res = run_image_recon(config);
      io::PgmImage outimg;
      outimg.maxval = res.maxval;
      outimg.pixels = res.reconstructed * (res.pixel_sum / config.intensity);
      io::write_pgm(path("reconstructed.pgm"), outimg);
      io::PgmImage origimg;
      origimg.maxval = res.maxval;
      origimg.pixels = res.original * (res.pixel_sum / config.intensity);
      io::write_pgm(path("original.pgm"), origimg);
      nlohmann::json j;
      j["rrmse"] = res.rrmse;
      j["n_patches"] = res.n_patches;
      j["n_converged"] = res.n_converged;
      j["intensity"] = config.intensity;
      j["sigma"] = config.sigma;
      std::ofstream f(path("image_report.json"));
      f << j.dump(2) << '\n';
      log << "image RRMSE = " << res.rrmse << '\n';
      return 0;
    }
  }
  return 2;
}

}  // namespace vstcs::harness
