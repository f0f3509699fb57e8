#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vstcs::solvers {

enum class Fidelity { vst, poisson_nll };

struct SolverOptions {
  int max_outer = 2000;
  double rel_tol = 1e-6;       // relative primal/dual residual tolerance
  int max_inner = 8;           // projected-gradient steps per z-update
  double mu0 = 1.0;            // initial ADMM penalty
  double mu_factor = 2.0;      // residual-balancing factor
  double mu_ratio = 10.0;      // residual-balancing ratio
  double nll_floor = 1e-10;    // log argument floor in the Poisson NLL
  int nll_max_outer = 500;
  double nll_obj_rel_tol = 1e-8;
  bool record_trace = false;
  Eigen::VectorXd init_x;      // non-default initial point (testing hook)
};

// One reconstruction instance. phi and y carry retained rows only; apply
// saturation rejection before building the problem. offset is c for the
// Anscombe fidelity and d = c + sigma^2 for the generalized one, and must be
// positive for Fidelity::vst.
struct SolverProblem {
  const Eigen::MatrixXd& phi;
  const Eigen::MatrixXd& psi;
  Eigen::VectorXd y;
  Fidelity fidelity = Fidelity::vst;
  double offset = 3.0 / 8.0;
  SolverOptions opts{};
};

struct TracePoint {
  int iter = 0;
  double objective = 0;
  double primal_res = 0;
  double dual_res = 0;
  double residual_vst = 0;
  double mu = 0;
  double t_step = 0;
};

struct SolverResult {
  Eigen::VectorXd theta_star;
  Eigen::VectorXd x_star;
  double objective = 0;
  double residual = 0;  // VST-domain residual at x_star
  int iterations = 0;
  bool converged = false;
  bool infeasible_flag = false;
  double rho_used = 0;
  std::vector<TracePoint> trace;
  std::vector<std::pair<double, double>> homotopy_trace;  // (rho, residual)
};

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t);

// Gradient of ||sqrt(y+c) - sqrt(A theta + c)||_2^2 in theta, A = phi psi:
// A^T (1 - sqrt(y+c) / sqrt(A theta + c)). Requires (A theta)_i + c > 0.
Eigen::VectorXd vst_fidelity_grad(const Eigen::VectorXd& theta,
                                  const SolverProblem& problem);

// Gradient of the smooth Poisson NLL part sum((A theta)_i - y_i log((A
// theta)_i + floor)): A^T (1 - y / (A theta + floor)).
Eigen::VectorXd nll_fidelity_grad(const Eigen::VectorXd& theta,
                                  const SolverProblem& problem);

// min_theta rho ||theta||_1 + ||sqrt(y+off) - sqrt(phi psi theta +
// off)||_2^2 subject to psi theta >= 0, by operator splitting on z = psi
// theta: exact soft-threshold theta-update (psi orthonormal), inner
// projected-gradient z-update with warm start and backtracking, scaled dual
// update, residual-balancing penalty adaptation. Hitting the iteration cap
// returns the best iterate with converged = false.
SolverResult solve_penalized(const SolverProblem& problem, double rho);

// min ||theta||_1 s.t. residual <= epsilon, psi theta >= 0, via bisection on
// log10(rho) in [-12, 2] over solve_penalized, keeping the largest rho whose
// residual stays within epsilon. Returns infeasible_flag when even rho =
// 1e-12 cannot reach epsilon.
SolverResult solve_constrained(const SolverProblem& problem, double epsilon);

// min rho ||theta||_1 + sum((A theta)_i - y_i log((A theta)_i + floor))
// subject to psi theta >= 0; requires y >= 0 (drop negative measurements
// first). Stops on relative objective change below nll_obj_rel_tol or the
// 500-iteration cap.
SolverResult solve_poisson_nll(const SolverProblem& problem, double rho);

// The regularization sweep set {1e-10, 1e-9, ..., 1e1}.
std::vector<double> rho_sweep_set();

struct OmniscientSelection {
  double best_rho = 0;
  SolverResult best_result;
};

// Solves for every rho in the sweep (penalized VST or NLL per
// problem.fidelity) and keeps the rho minimizing ||theta_true - theta*||_2.
OmniscientSelection omniscient_rho(const SolverProblem& problem,
                                   const Eigen::VectorXd& theta_true,
                                   const std::vector<double>& sweep);

void write_trace_csv(const std::string& path,
                     const std::vector<TracePoint>& trace);

}  // namespace vstcs::solvers
