#pragma once

// Test-only high-accuracy reference for the penalized VST objective
//   rho ||theta||_1 + ||sqrt(y+c) - sqrt(phi psi theta + c)||_2^2
//   subject to psi theta >= 0.
//
// FISTA with adaptive restart; the composite prox (l1 + cone indicator) is
// computed by Dykstra alternation between the exact soft-threshold and the
// exact cone projection psi^T max(psi theta, 0). This path shares nothing
// with the production operator-splitting solver and serves as its oracle.

#include <cmath>

#include <Eigen/Dense>

namespace vstcs_test {

struct ReferenceResult {
  Eigen::VectorXd theta;
  double objective = 0;
  int iterations = 0;
};

inline Eigen::VectorXd reference_soft(const Eigen::VectorXd& v, double t) {
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i)) - t;
    out(i) = a > 0 ? (v(i) > 0 ? a : -a) : 0.0;
  }
  return out;
}

// prox of step * (rho ||.||_1 + ind(psi . >= 0)) by Dykstra alternation.
inline Eigen::VectorXd reference_prox(const Eigen::VectorXd& v,
                                      const Eigen::MatrixXd& psi, double rho,
                                      double step) {
  Eigen::VectorXd x = v;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(v.size());
  Eigen::VectorXd q = Eigen::VectorXd::Zero(v.size());
  for (int k = 0; k < 400; ++k) {
    const Eigen::VectorXd a = reference_soft(x + p, rho * step);
    p = x + p - a;
    const Eigen::VectorXd b = psi.transpose() * (psi * (a + q)).cwiseMax(0.0);
    q = a + q - b;
    const double change = (b - x).norm();
    x = b;
    if (change <= 1e-15 * (1.0 + x.norm())) break;
  }
  return x;
}

inline ReferenceResult reference_penalized_solve(
    const Eigen::MatrixXd& phi, const Eigen::MatrixXd& psi,
    const Eigen::VectorXd& y, double c, double rho, int max_iters = 100000,
    double tol = 1e-12) {
  const Eigen::MatrixXd A = phi * psi;
  const Eigen::VectorXd ty = (y.array() + c).sqrt();

  const auto fid = [&](const Eigen::VectorXd& theta) {
    return (ty.array() - ((A * theta).array() + c).sqrt()).square().sum();
  };
  const auto grad = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd r = A * theta;
    const Eigen::VectorXd q =
        (1.0 - ty.array() / (r.array() + c).sqrt()).matrix();
    return Eigen::VectorXd(A.transpose() * q);
  };
  const auto objective = [&](const Eigen::VectorXd& theta) {
    return rho * theta.lpNorm<1>() + fid(theta);
  };

  const int m = static_cast<int>(psi.cols());
  Eigen::VectorXd theta = reference_prox(
      psi.transpose() * Eigen::VectorXd::Constant(m, std::max(y.sum(), 1.0) / m),
      psi, rho, 1.0);
  Eigen::VectorXd momentum = theta;
  double t_acc = 1.0;
  double step = 1.0;
  double f_best = objective(theta);
  Eigen::VectorXd best = theta;
  int it = 0;
  for (it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd g = grad(momentum);
    const double f_mom = fid(momentum);
    Eigen::VectorXd theta_new;
    for (int bt = 0; bt < 80; ++bt) {
      theta_new = reference_prox(momentum - step * g, psi, rho, step);
      const Eigen::VectorXd d = theta_new - momentum;
      if (fid(theta_new) <=
          f_mom + g.dot(d) + d.squaredNorm() / (2.0 * step) +
              1e-14 * (std::abs(f_mom) + 1.0)) {
        break;
      }
      step *= 0.5;
    }
    const double f_new = objective(theta_new);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
    if (f_new > f_best) {
      momentum = theta_new;  // restart
      t_acc = 1.0;
    } else {
      momentum = theta_new + ((t_acc - 1.0) / t_next) * (theta_new - theta);
      t_acc = t_next;
    }
    const double move = (theta_new - theta).norm();
    theta = theta_new;
    if (f_new < f_best) {
      f_best = f_new;
      best = theta_new;
    }
    step = std::min(step * 1.1, 1e18);
    if (move <= tol * (1.0 + theta.norm())) break;
  }
  ReferenceResult out;
  out.theta = best;
  out.objective = f_best;
  out.iterations = it;
  return out;
}

}  // namespace vstcs_test
