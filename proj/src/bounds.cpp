#include "vstcs/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace vstcs::bounds {

namespace {

double variance_bound_impl(const Eigen::VectorXd& gamma, double offset,
                           double extra_num, Variant variant) {
  if (gamma.size() == 0) {
    throw std::invalid_argument("variance bound: empty rate vector");
  }
  double num = 0, den = 0;
  for (int i = 0; i < gamma.size(); ++i) {
    const double gi = gamma(i);
    if (!(gi >= 0)) {
      throw std::domain_error("variance bound: rates must be >= 0");
    }
    const double gc = gi + offset;
    if (gc <= 0) {
      throw std::domain_error("variance bound: gamma + offset must be > 0");
    }
    num += (gi * (1.0 + 3.0 * gi) + extra_num) / (gc * gc);
    den += std::max(0.0, gi / (4.0 * gc) - gi / (8.0 * gc * gc));
  }
  if (variant == Variant::as_derived) num /= 4.0;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace

double t1_variance_bound(const Eigen::VectorXd& gamma, double c,
                         Variant variant) {
  return variance_bound_impl(gamma, c, 0.0, variant);
}

double t1_variance_constant(double c) {
  if (c < 0) throw std::invalid_argument("t1_variance_constant: c >= 0");
  return 8.0 * (1.0 + c) * (1.0 + c) / (2.0 * c + 1.0);
}

double t3_variance_bound(const Eigen::VectorXd& gamma, double c, double sigma,
                         Variant variant) {
  if (sigma < 0) throw std::invalid_argument("t3_variance_bound: sigma >= 0");
  const double d = c + sigma * sigma;
  return variance_bound_impl(gamma, d, std::pow(sigma, 4), variant);
}

double t3_variance_constant(double c, double sigma) {
  if (c < 0 || sigma < 0) {
    throw std::invalid_argument("t3_variance_constant: c, sigma >= 0");
  }
  const double d = c + sigma * sigma;
  return 1.25 * 8.0 * (1.0 + d) * (1.0 + d) / (2.0 * d + 1.0);
}

EpsilonBound epsilon_bound(int n_measurements, double kappa,
                           const noise::NoiseModel& model, double c) {
  if (n_measurements < 1) {
    throw std::invalid_argument("epsilon_bound: N >= 1");
  }
  if (!(kappa > 0)) throw std::invalid_argument("epsilon_bound: kappa > 0");
  const double root_n = std::sqrt(static_cast<double>(n_measurements));
  EpsilonBound eb;
  eb.practical_eps = 2.0 * root_n;
  if (model.kind == noise::NoiseModel::Kind::poisson_gaussian) {
    const double vu = t3_variance_constant(c, model.sigma);
    eb.theorem_eps = root_n * (std::sqrt(vu) / kappa + 1.0 / std::sqrt(2.0));
  } else {
    eb.theorem_eps =
        root_n * (kTailCoefficient / kappa + 1.0 / std::sqrt(2.0));
  }
  return eb;
}

RreConstants rre_constants(double delta_2s) {
  if (!(delta_2s >= 0)) {
    throw std::invalid_argument("rre_constants: delta_2s >= 0");
  }
  if (delta_2s >= kRicLimit) {
    throw std::domain_error(
        "rre_constants: bound inapplicable, delta_2s >= sqrt(2)-1");
  }
  RreConstants k;
  const double denom = 1.0 - delta_2s * (std::sqrt(2.0) + 1.0);
  k.c_prime = 2.0 * std::sqrt(1.0 + delta_2s) / denom;
  k.c_dprime = 2.0 * std::sqrt(2.0) * delta_2s / denom;
  k.c1 = 2.0 * k.c_prime;
  k.c2 = 2.0 + 2.0 * k.c_dprime;
  return k;
}

double tail_l1(const Eigen::VectorXd& theta, int s) {
  if (s < 0) throw std::invalid_argument("tail_l1: s >= 0");
  if (s >= theta.size()) return 0.0;
  std::vector<double> mags(theta.size());
  for (int i = 0; i < theta.size(); ++i) mags[i] = std::abs(theta(i));
  std::nth_element(mags.begin(), mags.begin() + s, mags.end(),
                   std::greater<double>());
  double tail = 0;
  for (int i = s; i < static_cast<int>(mags.size()); ++i) tail += mags[i];
  return tail;
}

namespace {

double rre_bound_impl(int n_measurements, double intensity, int s,
                      double offset, double tau, double delta_2s,
                      const Eigen::VectorXd& theta) {
  if (!(intensity > 0)) throw std::invalid_argument("rre bound: I > 0");
  if (s < 1) throw std::invalid_argument("rre bound: s >= 1");
  const RreConstants k = rre_constants(delta_2s);
  const double n = static_cast<double>(n_measurements);
  const double term1 =
      k.c1 * std::sqrt(n) * tau *
      std::sqrt(1.0 / intensity + offset * n / (intensity * intensity));
  const double term2 =
      k.c2 * tail_l1(theta, s) / (std::sqrt(static_cast<double>(s)) * intensity);
  return term1 + term2;
}

}  // namespace

double t2_rre_bound(int n_measurements, double intensity, int s, double c,
                    double delta_2s, double kappa,
                    const Eigen::VectorXd& theta) {
  if (!(kappa > 0)) throw std::invalid_argument("t2_rre_bound: kappa > 0");
  const double tau = kTailCoefficient / kappa + 1.0 / std::sqrt(2.0);
  return rre_bound_impl(n_measurements, intensity, s, c, tau, delta_2s, theta);
}

double t4_rre_bound(int n_measurements, double intensity, int s, double c,
                    double sigma, double delta_2s, double kappa,
                    const Eigen::VectorXd& theta) {
  if (!(kappa > 0)) throw std::invalid_argument("t4_rre_bound: kappa > 0");
  const double vu = t3_variance_constant(c, sigma);
  const double tau_d = std::sqrt(vu) / kappa + 1.0 / std::sqrt(2.0);
  const double d = c + sigma * sigma;
  return rre_bound_impl(n_measurements, intensity, s, d, tau_d, delta_2s,
                        theta);
}

BoundReport make_bound_report(int n_measurements, int m, double intensity,
                              int s, double c, double sigma, double kappa,
                              double delta_2s,
                              const noise::NoiseModel& model) {
  const bool pg = model.kind == noise::NoiseModel::Kind::poisson_gaussian;
  BoundReport r;
  r.n_measurements = n_measurements;
  r.m = m;
  r.intensity = intensity;
  r.s = s;
  r.sigma = sigma;
  r.kappa = kappa;
  r.delta_2s = delta_2s;
  r.c_or_d = pg ? c + sigma * sigma : c;

  const EpsilonBound eb = epsilon_bound(n_measurements, kappa, model, c);
  r.epsilon_theorem = eb.theorem_eps;
  r.epsilon_practical = eb.practical_eps;
  r.mean_bound = std::sqrt(n_measurements / 2.0);

  const Eigen::VectorXd flat = Eigen::VectorXd::Constant(
      n_measurements, intensity * 0.5 / n_measurements);
  r.var_bound_formula = pg ? t3_variance_bound(flat, c, sigma)
                           : t1_variance_bound(flat, c);
  r.var_bound_constant =
      pg ? t3_variance_constant(c, sigma) : t1_variance_constant(c);
  if (pg) r.v_u = t3_variance_constant(c, sigma);

  if (delta_2s < kRicLimit) {
    const RreConstants k = rre_constants(delta_2s);
    r.c1 = k.c1;
    r.c2 = k.c2;
    const Eigen::VectorXd sparse_theta = Eigen::VectorXd::Zero(1);
    r.rre_bound = pg ? t4_rre_bound(n_measurements, intensity, s, c, sigma,
                                    delta_2s, kappa, sparse_theta)
                     : t2_rre_bound(n_measurements, intensity, s, c, delta_2s,
                                    kappa, sparse_theta);
  }
  r.tail_probability = 1.0 - kappa * kappa / n_measurements;
  return r;
}

std::string to_json(const BoundReport& r) {
  nlohmann::json j;
  j["context"] = {{"N", r.n_measurements}, {"m", r.m},
                  {"I", r.intensity},      {"s", r.s},
                  {"c_or_d", r.c_or_d},    {"sigma", r.sigma},
                  {"kappa", r.kappa},      {"delta_2s", r.delta_2s}};
  j["epsilon_theorem"] = r.epsilon_theorem;
  j["epsilon_practical"] = r.epsilon_practical;
  j["mean_bound"] = r.mean_bound;
  j["var_bound_formula"] = r.var_bound_formula;
  j["var_bound_constant"] = r.var_bound_constant;
  j["printed_var_constant"] = r.printed_var_constant;
  if (r.v_u) j["v_u"] = *r.v_u;
  if (r.c1) j["C1"] = *r.c1;
  if (r.c2) j["C2"] = *r.c2;
  if (r.rre_bound) {
    j["rre_bound"] = *r.rre_bound;
  } else {
    j["rre_bound"] = nullptr;
    j["rre_bound_note"] = "inapplicable: delta_2s >= sqrt(2)-1";
  }
  j["tail_probability"] = r.tail_probability;
  j["formula_version"] = r.formula_version;
  return j.dump(2);
}

}  // namespace vstcs::bounds
