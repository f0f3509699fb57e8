#include "vstcs/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include "vstcs/io.hpp"
#include "vstcs/vst.hpp"

namespace vstcs::solvers {

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  if (t < 0) throw std::invalid_argument("soft_threshold: t >= 0");
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i)) - t;
    out(i) = a > 0 ? (v(i) > 0 ? a : -a) : 0.0;
  }
  return out;
}

namespace {

void check_problem(const SolverProblem& p) {
  const int n = static_cast<int>(p.phi.rows());
  const int m = static_cast<int>(p.phi.cols());
  if (p.psi.rows() != m || p.psi.cols() != m) {
    throw std::invalid_argument("solver: psi must be m x m with m = phi cols");
  }
  if (p.y.size() != n) {
    throw std::invalid_argument("solver: y size must match phi rows");
  }
  if (p.fidelity == Fidelity::vst && !(p.offset > 0)) {
    throw std::invalid_argument("solver: VST fidelity needs offset > 0");
  }
  if (p.fidelity == Fidelity::poisson_nll && (p.y.array() < 0).any()) {
    throw std::domain_error(
        "solver: Poisson NLL needs y >= 0 (drop negative measurements)");
  }
}

// Fidelity as a function of the rate vector r = phi z.
struct FidelityFn {
  Fidelity kind;
  double offset;
  double floor;
  Eigen::VectorXd ty;  // sqrt(y + offset), VST only
  const Eigen::VectorXd* y;

  explicit FidelityFn(const SolverProblem& p)
      : kind(p.fidelity), offset(p.offset), floor(p.opts.nll_floor), y(&p.y) {
    if (kind == Fidelity::vst) {
      ty = (p.y.array() + offset).sqrt();
      if (!ty.allFinite()) {
        throw std::domain_error(
            "solver: y + offset < 0; apply saturation rejection first");
      }
    }
  }

  double value(const Eigen::VectorXd& r) const {
    if (kind == Fidelity::vst) {
      return (ty.array() - (r.array() + offset).sqrt()).square().sum();
    }
    return (r.array() - y->array() * (r.array() + floor).log()).sum();
  }

  // q = d value / d r (elementwise).
  void grad_rates(const Eigen::VectorXd& r, Eigen::VectorXd& q) const {
    if (kind == Fidelity::vst) {
      q = (1.0 - ty.array() / (r.array() + offset).sqrt()).matrix();
    } else {
      q = (1.0 - y->array() / (r.array() + floor)).matrix();
    }
  }
};

struct WarmState {
  Eigen::VectorXd z, u;
  double mu = 1.0;
  double t_step = 1.0;
};

// Largest squared singular value of phi, by power iteration on phi^T phi.
double spectral_norm_sq(const Eigen::MatrixXd& phi) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(phi.cols());
  v.normalize();
  double lambda = 0;
  for (int k = 0; k < 30; ++k) {
    Eigen::VectorXd w = phi.transpose() * (phi * v);
    lambda = w.norm();
    if (lambda == 0) return 0;
    v = w / lambda;
  }
  return lambda;
}

// Curvature scale of the fidelity at rates near the data. The ADMM penalty
// must sit at this scale, not at 1: the measurement intensity moves it over
// ten decades and residual balancing alone cannot bridge that gap.
double curvature_scale(const SolverProblem& p, double norm_sq) {
  std::vector<double> w(static_cast<std::size_t>(p.y.size()));
  for (int i = 0; i < p.y.size(); ++i) {
    if (p.fidelity == Fidelity::vst) {
      w[static_cast<std::size_t>(i)] =
          1.0 / (2.0 * std::max(p.y(i) + p.offset, 1e-3));
    } else {
      w[static_cast<std::size_t>(i)] = 1.0 / std::max(p.y(i), 1.0);
    }
  }
  std::nth_element(w.begin(), w.begin() + w.size() / 2, w.end());
  const double med = w.empty() ? 1.0 : w[w.size() / 2];
  return std::max(norm_sq * med, 1e-300);
}

SolverResult admm_solve(const SolverProblem& p, double rho,
                        WarmState* warm_io) {
  check_problem(p);
  if (!(rho > 0)) throw std::invalid_argument("solver: rho > 0");
  const auto& opts = p.opts;
  const int m = static_cast<int>(p.phi.cols());
  const bool nll = p.fidelity == Fidelity::poisson_nll;
  const int cap = nll ? opts.nll_max_outer : opts.max_outer;

  FidelityFn fid(p);

  Eigen::VectorXd z, u;
  double mu, t_step;
  if (warm_io && warm_io->z.size() == m) {
    z = warm_io->z;
    u = warm_io->u;
    mu = warm_io->mu;
    t_step = warm_io->t_step;
  } else {
    // Feasible, deterministic, scale-aware start: constant vector matching
    // the measurement-implied intensity estimate (clipped at zero).
    if (opts.init_x.size() == m) {
      z = opts.init_x.cwiseMax(0.0);
    } else {
      const double ihat = std::max(p.y.sum(), 0.0);
      z = Eigen::VectorXd::Constant(m, ihat / m);
    }
    u = Eigen::VectorXd::Zero(m);
    const double curv = curvature_scale(p, spectral_norm_sq(p.phi));
    mu = opts.mu0 * curv;
    t_step = 1.0 / (2.0 * curv);
  }

  Eigen::VectorXd r = p.phi * z;
  double fid_val = fid.value(r);

  auto objective_at = [&](const Eigen::VectorXd& zv, double fv) {
    return rho * (p.psi.transpose() * zv).lpNorm<1>() + fv;
  };

  SolverResult res;
  double obj_best = objective_at(z, fid_val);
  Eigen::VectorXd z_best = z;

  Eigen::VectorXd theta(m), w(m), v(m), q(r.size()), grad(m), z_new(m), r_new(r.size());
  double prev_obj = obj_best;
  double l_est = 1.0 / (2.0 * t_step);  // rate-limited curvature tracker
  double hi_relax = 1.0, lo_relax = 1.0;
  int small_change_streak = 0;
  bool converged = false;
  int it = 0;

  for (it = 1; it <= cap; ++it) {
    // theta-update: exact prox of rho||.||_1 (psi orthonormal).
    theta = soft_threshold(p.psi.transpose() * (z - u), rho / mu);
    w.noalias() = p.psi * theta;
    v = w + u;

    // z-update: projected gradient on fid(phi z) + mu/2 ||z - v||^2, warm
    // started at the previous z, with backtracking line search.
    const Eigen::VectorXd z_prev = z;
    double g_val = fid_val + 0.5 * mu * (z - v).squaredNorm();
    for (int inner = 0; inner < opts.max_inner; ++inner) {
      fid.grad_rates(r, q);
      grad.noalias() = p.phi.transpose() * q;
      grad += mu * (z - v);
      bool accepted = false;
      double dz_norm2 = 0;
      for (int bt = 0; bt < 60; ++bt) {
        z_new = (z - t_step * grad).cwiseMax(0.0);
        const Eigen::VectorXd dz = z_new - z;
        dz_norm2 = dz.squaredNorm();
        if (dz_norm2 == 0) {
          accepted = false;
          break;
        }
        r_new.noalias() = p.phi * z_new;
        const double fid_new = fid.value(r_new);
        const double g_new = fid_new + 0.5 * mu * (z_new - v).squaredNorm();
        const double model =
            g_val + grad.dot(dz) + dz_norm2 / (2.0 * t_step);
        if (g_new <= model + 1e-12 * (std::abs(g_val) + 1.0)) {
          z = z_new;
          r = r_new;
          fid_val = fid_new;
          g_val = g_new;
          accepted = true;
          break;
        }
        t_step *= 0.5;
      }
      if (!accepted) break;
      t_step = std::min(t_step * 1.25, 1e15);
      if (std::sqrt(dz_norm2) <= 1e-3 * opts.rel_tol * (1.0 + z.norm())) break;
    }

    u += w - z;

    const double primal = (w - z).norm();
    const double dual = mu * (z - z_prev).norm();
    const double eps_pri =
        opts.rel_tol * (std::max(w.norm(), z.norm()) + 1.0);
    const double eps_dual = opts.rel_tol * (mu * u.norm() + 1.0);

    const double obj = objective_at(z, fid_val);
    if (obj < obj_best) {
      obj_best = obj;
      z_best = z;
    }

    if (opts.record_trace) {
      TracePoint tp;
      tp.iter = it;
      tp.objective = obj_best;
      tp.primal_res = primal;
      tp.dual_res = dual;
      tp.mu = mu;
      tp.t_step = t_step;
      if (p.fidelity == Fidelity::vst) {
        tp.residual_vst = std::sqrt(fid_val);
      } else {
        tp.residual_vst =
            ((p.y.array() + p.offset).sqrt() - (r.array() + p.offset).sqrt())
                .matrix()
                .norm();
      }
      res.trace.push_back(tp);
    }

    if (nll) {
      const double change =
          std::abs(obj - prev_obj) / std::max(1.0, std::abs(obj));
      small_change_streak = change < opts.nll_obj_rel_tol
                                ? small_change_streak + 1
                                : 0;
      prev_obj = obj;
      if (small_change_streak >= 3 && primal <= eps_pri) {
        converged = true;
        break;
      }
    } else if (primal <= eps_pri && dual <= eps_dual && it > 1) {
      converged = true;
      break;
    }

    // Residual balancing keeps the two convergence measures comparable.
    // mu_ratio >= 1e100 disables all penalty adaptation (fixed-mu mode).
    if (opts.mu_ratio >= 1e100) continue;
    double target = mu;
    if (primal > opts.mu_ratio * dual) {
      target = mu * opts.mu_factor;
    } else if (dual > opts.mu_ratio * primal) {
      target = mu / opts.mu_factor;
    }
    // Tether the penalty to the fidelity curvature implied by the accepted
    // inner step sizes; far outside that band the z-update either races
    // ahead of theta or crawls, and the residual ratio goes blind. The band
    // is soft: when balancing keeps pushing against a wall, the wall gives
    // way gradually (the l1-resolution tail legitimately needs mu above the
    // curvature scale).
    const double live = std::max(1.0 / t_step - mu, 1e-300);
    l_est = std::clamp(live, l_est / opts.mu_factor, l_est * opts.mu_factor);
    const double band_lo = l_est / (256.0 * lo_relax);
    const double band_hi = 4.0 * l_est * hi_relax;
    hi_relax = target > band_hi ? hi_relax * 1.2 : std::max(1.0, hi_relax / 1.2);
    lo_relax = target < band_lo ? lo_relax * 1.2 : std::max(1.0, lo_relax / 1.2);
    target = std::clamp(target, band_lo, band_hi);
    target = std::clamp(target, mu / opts.mu_factor, mu * opts.mu_factor);
    target = std::clamp(target, 1e-18, 1e18);
    if (target != mu) {
      u *= mu / target;
      mu = target;
    }
  }

  if (warm_io) {
    warm_io->z = z;
    warm_io->u = u;
    warm_io->mu = mu;
    warm_io->t_step = t_step;
  }

  res.theta_star = p.psi.transpose() * z_best;
  res.x_star = p.psi * res.theta_star;
  const Eigen::VectorXd r_star = p.phi * res.x_star;
  res.objective = rho * res.theta_star.lpNorm<1>() + fid.value(r_star);
  const vst::VstSpec report_spec{vst::VstSpec::Family::anscombe, p.offset, 0,
                                 1, 0};
  res.residual = vst::residual_magnitude(p.y, r_star, report_spec);
  res.iterations = std::min(it, cap);
  res.converged = converged;
  res.rho_used = rho;
  return res;
}

}  // namespace

Eigen::VectorXd vst_fidelity_grad(const Eigen::VectorXd& theta,
                                  const SolverProblem& problem) {
  const Eigen::VectorXd r = problem.phi * (problem.psi * theta);
  if (((r.array() + problem.offset) <= 0).any()) {
    throw std::domain_error("vst_fidelity_grad: (A theta)_i + c <= 0");
  }
  const Eigen::VectorXd ty = (problem.y.array() + problem.offset).sqrt();
  const Eigen::VectorXd q =
      (1.0 - ty.array() / (r.array() + problem.offset).sqrt()).matrix();
  return problem.psi.transpose() * (problem.phi.transpose() * q);
}

Eigen::VectorXd nll_fidelity_grad(const Eigen::VectorXd& theta,
                                  const SolverProblem& problem) {
  const Eigen::VectorXd r = problem.phi * (problem.psi * theta);
  const Eigen::VectorXd q =
      (1.0 -
       problem.y.array() / (r.array() + problem.opts.nll_floor))
          .matrix();
  return problem.psi.transpose() * (problem.phi.transpose() * q);
}

namespace {

// Euclidean projection onto the l1 ball of radius tau (Duchi et al. simplex
// projection).
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double tau) {
  if (tau <= 0) return Eigen::VectorXd::Zero(v.size());
  if (v.lpNorm<1>() <= tau) return v;
  std::vector<double> mags(static_cast<std::size_t>(v.size()));
  for (int i = 0; i < v.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(v(i));
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double cum = 0, theta = 0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    cum += mags[k];
    if (k + 1 == mags.size() ||
        mags[k + 1] <= (cum - tau) / static_cast<double>(k + 1)) {
      theta = (cum - tau) / static_cast<double>(k + 1);
      break;
    }
  }
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i)) - theta;
    out(i) = a > 0 ? (v(i) > 0 ? a : -a) : 0.0;
  }
  return out;
}

// Dykstra projection onto {||theta||_1 <= tau} intersected with
// {psi theta >= 0}; p/q carry the correction memory across calls.
struct DykstraState {
  Eigen::VectorXd p, q;
};

Eigen::VectorXd project_feasible(const Eigen::VectorXd& v, double tau,
                                 const Eigen::MatrixXd& psi,
                                 DykstraState& state, int max_iters = 60) {
  const int m = static_cast<int>(v.size());
  if (state.p.size() != m) {
    state.p = Eigen::VectorXd::Zero(m);
    state.q = Eigen::VectorXd::Zero(m);
  }
  Eigen::VectorXd x = v;
  for (int k = 0; k < max_iters; ++k) {
    const Eigen::VectorXd a = project_l1_ball(x + state.p, tau);
    state.p = x + state.p - a;
    const Eigen::VectorXd b =
        psi.transpose() * (psi * (a + state.q)).cwiseMax(0.0);
    state.q = a + state.q - b;
    const double change = (b - x).norm();
    x = b;
    if (change <= 1e-12 * (1.0 + x.norm())) break;
  }
  return x;
}

// min fid(phi psi theta) subject to ||theta||_1 <= tau, psi theta >= 0, by
// FISTA with backtracking and restart; projections via Dykstra. Returns the
// final theta; residual = sqrt(fid) for the VST fidelity.
struct LassoResult {
  Eigen::VectorXd theta;
  double residual = 0;
};

LassoResult lasso_subproblem(const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& psi,
                             const FidelityFn& fid, double tau,
                             const Eigen::VectorXd& theta0, int max_iters,
                             double step0) {
  DykstraState dyk;
  Eigen::VectorXd theta = project_feasible(theta0, tau, psi, dyk);
  Eigen::VectorXd momentum = theta;
  double t_acc = 1.0;
  double step = step0;
  Eigen::VectorXd r = A * theta;
  double f_prev = fid.value(r);
  for (int k = 0; k < max_iters; ++k) {
    const Eigen::VectorXd r_mom = A * momentum;
    Eigen::VectorXd q(r_mom.size());
    fid.grad_rates(r_mom, q);
    const Eigen::VectorXd grad = A.transpose() * q;
    const double f_mom = fid.value(r_mom);
    Eigen::VectorXd theta_new;
    double f_new = 0;
    for (int bt = 0; bt < 60; ++bt) {
      theta_new = project_feasible(momentum - step * grad, tau, psi, dyk);
      const Eigen::VectorXd d = theta_new - momentum;
      f_new = fid.value(A * theta_new);
      if (f_new <= f_mom + grad.dot(d) + d.squaredNorm() / (2.0 * step) +
                       1e-12 * (std::abs(f_mom) + 1.0)) {
        break;
      }
      step *= 0.5;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
    Eigen::VectorXd accel =
        theta_new + ((t_acc - 1.0) / t_next) * (theta_new - theta);
    if (f_new > f_prev) {  // restart the momentum when it overshoots
      accel = theta_new;
      t_acc = 1.0;
    } else {
      t_acc = t_next;
    }
    const double move = (theta_new - theta).norm();
    theta = theta_new;
    momentum = accel;
    f_prev = std::min(f_prev, f_new);
    step = std::min(step * 1.2, 1e18);
    if (move <= 1e-10 * (1.0 + theta.norm())) break;
  }
  LassoResult out;
  out.theta = theta;
  out.residual = std::sqrt(std::max(fid.value(A * theta), 0.0));
  return out;
}

// Pareto walk on the l1-ball radius (SPGL1 approach): grow tau from zero
// with Newton steps on the value function phi(tau) = min-fidelity(tau)
// until the fidelity first drops to `level`. Approaching from below keeps
// every step conservative (the slope estimate ignores the positivity cone,
// which only shrinks the true slope) and every subproblem warm. Returns the
// first iterate with fid <= level, or nothing.
struct ParetoResult {
  Eigen::VectorXd theta;
  double fid_value = 0;
  bool reached = false;
};

ParetoResult pareto_walk(const Eigen::MatrixXd& A, const Eigen::MatrixXd& psi,
                         const FidelityFn& fid, double level, double aim,
                         double tau_cap, double step0) {
  ParetoResult out;
  if (!(tau_cap > 0)) return out;
  const bool debug = std::getenv("VSTCS_WALK_DEBUG") != nullptr;
  double tau = 0.0;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(A.cols());
  double value = fid.value(A * theta);
  Eigen::VectorXd q(A.rows());
  for (int k = 0; k < 64; ++k) {
    if (value <= level) break;
    fid.grad_rates(A * theta, q);
    const double slope =
        std::max((A.transpose() * q).cwiseAbs().maxCoeff(), 1e-300);
    double tau_next = tau + (value - aim) / slope;
    if (!(tau_next > tau)) break;
    tau_next = std::min(tau_next, tau_cap);
    const LassoResult r =
        lasso_subproblem(A, psi, fid, tau_next, theta, 600, step0);
    tau = tau_next;
    theta = r.theta;
    value = fid.value(A * theta);
    if (debug) {
      std::fprintf(stderr, "walk k=%d tau=%.9e value=%.6e level=%.3e l1=%.9e\n",
                   k, tau, value, level, theta.lpNorm<1>());
    }
    if (tau >= tau_cap && value > level) return out;
  }
  if (value <= level) {
    out.theta = std::move(theta);
    out.fid_value = value;
    out.reached = true;
  }
  return out;
}

void refresh_result(const SolverProblem& p, const FidelityFn& fid,
                    SolverResult& best) {
  best.x_star = p.psi * best.theta_star;
  const vst::VstSpec report_spec{vst::VstSpec::Family::anscombe, p.offset, 0,
                                 1, 0};
  best.residual =
      vst::residual_magnitude(p.y, p.phi * best.x_star, report_spec);
  best.objective = best.rho_used * best.theta_star.lpNorm<1>() +
                   fid.value(p.phi * best.x_star);
}

// The penalized homotopy cannot reach l1 optimality once rho is tiny (the
// subgradient signal vanishes against the fidelity curvature); the
// constrained solve finishes on the scale-free LASSO form instead.
void lasso_polish(const SolverProblem& p, double epsilon, SolverResult& best,
                  double tau_cap = 0) {
  const Eigen::MatrixXd A = p.phi * p.psi;
  FidelityFn fid(p);
  const double step0 =
      1.0 / (2.0 * curvature_scale(p, spectral_norm_sq(p.phi)));
  if (tau_cap <= 0) tau_cap = best.theta_star.lpNorm<1>();
  // Aiming most of the way into the target keeps the Newton steps from
  // creeping as the level is approached (landing residual >= 0.9 epsilon).
  const ParetoResult r = pareto_walk(A, p.psi, fid, epsilon * epsilon,
                                     0.81 * epsilon * epsilon, tau_cap, step0);
  if (!r.reached) return;
  if (r.theta.lpNorm<1>() <= tau_cap + 1e-9) {
    best.theta_star = r.theta;
    refresh_result(p, fid, best);
  }
}

// Fit-dominated penalized solves (rho contributes a negligible share of the
// objective) leave the operator-splitting iterate l1-sloppy in the null
// space of A. Every penalized optimum is Pareto-minimal, so walk the Pareto
// path and keep the best penalized objective rho tau + phi(tau) along it;
// the path objective is convex in tau, so the first upturn ends the walk.
void penalized_pareto_polish(const SolverProblem& p, double rho,
                             SolverResult& best) {
  FidelityFn fid(p);
  const double fit = fid.value(p.phi * best.x_star);
  const double zero_fit = fid.value(Eigen::VectorXd::Zero(p.y.size()));
  const double span = std::max(zero_fit - fit, 0.0);
  const double penalty = rho * best.theta_star.lpNorm<1>();
  if (penalty > 1e-2 * span) return;  // rho is active; the ADMM answer stands

  const Eigen::MatrixXd A = p.phi * p.psi;
  const double step0 =
      1.0 / (2.0 * curvature_scale(p, spectral_norm_sq(p.phi)));
  const double tau_cap = best.theta_star.lpNorm<1>();
  if (!(tau_cap > 0)) return;

  if (p.fidelity == Fidelity::vst) {
    // Newton walk from below to the achieved fit level; slopes are regular
    // for a positive offset.
    const double slack = 1e-7 * span + 1e-12;
    const ParetoResult w = pareto_walk(A, p.psi, fid, fit + slack,
                                       fit + 0.5 * slack, tau_cap, step0);
    if (w.reached) {
      const double obj = rho * w.theta.lpNorm<1>() + w.fid_value;
      if (obj < best.objective) {
        best.theta_star = w.theta;
        refresh_result(p, fid, best);
      }
    }
    return;
  }

  // Golden-section on tau (gradient-based steps are useless here: the NLL
  // gradient is singular at the zero start). Track the best evaluated point.
  double best_obj = best.objective;
  Eigen::VectorXd best_theta = best.theta_star;
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(A.cols());
  const auto path_obj = [&](double tau) {
    const LassoResult r =
        lasso_subproblem(A, p.psi, fid, tau, warm, 600, step0);
    warm = r.theta;
    const double obj = rho * r.theta.lpNorm<1>() + fid.value(A * r.theta);
    if (obj < best_obj) {
      best_obj = obj;
      best_theta = r.theta;
    }
    return obj;
  };
  const double invphi = 0.6180339887498949;
  double a = 0.0, b = tau_cap;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = path_obj(c), fd = path_obj(d);
  for (int k = 0; k < 24 && (b - a) > 1e-6 * tau_cap; ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = path_obj(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = path_obj(d);
    }
  }
  if (best_obj < best.objective) {
    best.theta_star = std::move(best_theta);
    refresh_result(p, fid, best);
  }
}

}  // namespace

SolverResult solve_constrained(const SolverProblem& problem, double epsilon) {
  if (!(epsilon > 0)) {
    throw std::invalid_argument("solve_constrained: epsilon > 0");
  }
  if (problem.fidelity != Fidelity::vst) {
    throw std::invalid_argument("solve_constrained: expects a VST fidelity");
  }
  std::vector<std::pair<double, double>> hist;
  WarmState warm;

  // Landing near a small epsilon needs the solve accuracy to resolve the
  // residual at that scale; tighten the tolerance when epsilon is small
  // relative to the data.
  SolverProblem tuned{problem.phi, problem.psi, problem.y, problem.fidelity,
                      problem.offset, problem.opts};
  {
    const double lip = std::sqrt(spectral_norm_sq(problem.phi)) /
                       (2.0 * std::sqrt(problem.offset));
    const double xscale =
        std::max(1.0, problem.y.cwiseMax(0.0).sum() /
                          std::sqrt(static_cast<double>(problem.psi.cols())));
    const double wanted = 0.05 * epsilon / (lip * xscale + 1e-300);
    tuned.opts.rel_tol =
        std::max(std::min(problem.opts.rel_tol, wanted), 1e-12);
  }

  auto run = [&](double log_rho, bool use_warm) {
    if (!use_warm) warm = WarmState{};  // force the default initialization
    SolverResult r = admm_solve(tuned, std::pow(10.0, log_rho), &warm);
    hist.emplace_back(std::pow(10.0, log_rho), r.residual);
    return r;
  };

  double log_lo = -12.0, log_hi = 2.0;
  SolverResult at_hi = run(log_hi, false);
  if (at_hi.residual <= epsilon) {
    at_hi.rho_used = std::pow(10.0, log_hi);
    lasso_polish(tuned, epsilon, at_hi);
    at_hi.homotopy_trace = std::move(hist);
    return at_hi;
  }
  SolverResult best = run(log_lo, false);
  if (best.residual > epsilon) {
    // The minimal-rho solve could not reach epsilon; give the scale-free
    // form a chance before declaring the constraint infeasible. Any
    // feasible point obeys ||theta||_1 = ||x||_1 <= sqrt(m) ||x||_2-ish;
    // a generous cap from the implied intensity covers that.
    const double cap = std::sqrt(static_cast<double>(problem.psi.cols())) *
                       (2.0 * problem.y.cwiseMax(0.0).sum() + 1.0);
    lasso_polish(tuned, epsilon, best, cap);
    best.infeasible_flag = best.residual > epsilon;
    best.rho_used = std::pow(10.0, log_lo);
    best.homotopy_trace = std::move(hist);
    return best;
  }
  for (int k = 0; k < 64 && log_hi - log_lo > 1e-3; ++k) {
    const double mid = 0.5 * (log_lo + log_hi);
    SolverResult r = run(mid, true);
    if (r.residual <= epsilon) {
      best = std::move(r);
      log_lo = mid;
      if (best.residual >= 0.99 * epsilon) break;
    } else {
      log_hi = mid;
    }
  }
  best.rho_used = std::pow(10.0, log_lo);
  // Deep in the small-rho end the penalized subgradient signal is too weak
  // for first-order splitting to certify l1 optimality; finish on the
  // scale-free LASSO form there.
  if (log_lo <= -7.5) lasso_polish(tuned, epsilon, best);
  best.homotopy_trace = std::move(hist);
  return best;
}

SolverResult solve_penalized(const SolverProblem& problem, double rho) {
  if (problem.fidelity != Fidelity::vst) {
    throw std::invalid_argument("solve_penalized: expects a VST fidelity");
  }
  SolverResult res = admm_solve(problem, rho, nullptr);
  penalized_pareto_polish(problem, rho, res);
  return res;
}

SolverResult solve_poisson_nll(const SolverProblem& problem, double rho) {
  if (problem.fidelity != Fidelity::poisson_nll) {
    throw std::invalid_argument(
        "solve_poisson_nll: problem.fidelity must be poisson_nll");
  }
  SolverResult res = admm_solve(problem, rho, nullptr);
  penalized_pareto_polish(problem, rho, res);
  return res;
}

std::vector<double> rho_sweep_set() {
  std::vector<double> s;
  for (int e = -10; e <= 1; ++e) s.push_back(std::pow(10.0, e));
  return s;
}

OmniscientSelection omniscient_rho(const SolverProblem& problem,
                                   const Eigen::VectorXd& theta_true,
                                   const std::vector<double>& sweep) {
  if (sweep.empty()) {
    throw std::invalid_argument("omniscient_rho: sweep set must be nonempty");
  }
  OmniscientSelection sel;
  double best_dist = std::numeric_limits<double>::infinity();
  for (double rho : sweep) {
    SolverResult r = problem.fidelity == Fidelity::poisson_nll
                         ? solve_poisson_nll(problem, rho)
                         : solve_penalized(problem, rho);
    const double dist = (theta_true - r.theta_star).norm();
    if (dist < best_dist) {
      best_dist = dist;
      sel.best_rho = rho;
      sel.best_result = std::move(r);
    }
  }
  return sel;
}

void write_trace_csv(const std::string& path,
                     const std::vector<TracePoint>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << "iter,objective,primal_res,dual_res,residual_vst\n";
  for (const auto& t : trace) {
    out << t.iter << ',' << io::format_double(t.objective) << ','
        << io::format_double(t.primal_res) << ','
        << io::format_double(t.dual_res) << ','
        << io::format_double(t.residual_vst) << '\n';
  }
}

}  // namespace vstcs::solvers
