#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "vstcs/noise.hpp"
#include "vstcs/sensing.hpp"

namespace vstcs::vst {

// Variance-stabilization transform specification.
//
// anscombe / bartlett:      t = sqrt(y + c)            (c = 3/8 resp. 0)
// generalized_anscombe:     t = sqrt(alpha y + c alpha^2 + sigma^2 - alpha g)
//                               / alpha
//                           (printed form has c = 3/8; for alpha = 1, g = 0
//                            this is sqrt(y + d) with d = c + sigma^2)
// freeman_tukey:            t = sqrt(y) + sqrt(y + 1)
struct VstSpec {
  enum class Family { anscombe, generalized_anscombe, freeman_tukey, bartlett };
  Family family = Family::anscombe;
  double c = 3.0 / 8.0;
  double sigma = 0;
  double alpha = 1;
  double g = 0;

  static VstSpec anscombe() { return {}; }
  static VstSpec bartlett() { return {Family::bartlett, 0.0, 0, 1, 0}; }
  static VstSpec freeman_tukey() {
    return {Family::freeman_tukey, 0.0, 0, 1, 0};
  }
  static VstSpec gat(double sigma, double alpha = 1, double g = 0,
                     double c = 3.0 / 8.0);

  // Derived offset d = c + sigma^2 (equals c for the pure-Poisson families).
  double d() const { return c + sigma * sigma; }
  // Offset added to y inside the square root; drives saturation rejection.
  double offset() const;
};

Eigen::VectorXd apply_vst(const Eigen::VectorXd& y, const VstSpec& spec);
double apply_vst_scalar(double y, const VstSpec& spec);

// Residual magnitude R = ||T(y) - T(rates)||_2 over retained coordinates,
// where T is the transform of `spec` (R_d when spec carries a sigma).
double residual_magnitude(const Eigen::VectorXd& y,
                          const Eigen::VectorXd& rates, const VstSpec& spec,
                          const std::vector<int>* rejected = nullptr);
double residual_magnitude(const noise::MeasurementSet& measurements,
                          const VstSpec& spec);

struct KsResult {
  double statistic = 0;
  bool reject_1pct = false;
  bool reject_5pct = false;
};

// Two-sided Kolmogorov-Smirnov statistic of `samples` against a Normal(mu,
// var) CDF, with the asymptotic critical values K(0.01) = 1.628 and
// K(0.05) = 1.358 scaled by 1/sqrt(n).
KsResult ks_test(const Eigen::VectorXd& samples, double mu, double var);

struct ResidualStats {
  int n_trials = 0;
  double mean = 0;
  double variance = 0;
  Eigen::VectorXd samples;
  double ks_statistic = 0;
  bool ks_reject_1pct = false;
  double sweep_value = 0;
};

// Monte-Carlo distribution of the residual magnitude for fixed (Phi, x):
// n_trials independent measurement vectors, R (or R_d) per trial, sample
// mean/unbiased variance, and a KS comparison against a Gaussian fitted with
// the sample moments. Saturation rejection (offset d) is applied per trial
// before the residual. OpenMP-parallel across trials; trial t uses the
// derived stream (seed, t), so results are thread-count independent.
ResidualStats residual_statistics(const Eigen::VectorXd& rates,
                                  const noise::NoiseModel& model,
                                  const VstSpec& spec, int n_trials,
                                  std::uint64_t seed);
ResidualStats residual_statistics(const sensing::SensingMatrix& matrix,
                                  const Eigen::VectorXd& x,
                                  const noise::NoiseModel& model,
                                  const VstSpec& spec, int n_trials,
                                  std::uint64_t seed);

// Serial reference; bit-identical to the parallel version.
ResidualStats residual_statistics_serial(const Eigen::VectorXd& rates,
                                         const noise::NoiseModel& model,
                                         const VstSpec& spec, int n_trials,
                                         std::uint64_t seed);

// Per-trial seed used inside residual_statistics; a single trial reproduces
// noise::sample_measurements(rates, model, trial_seed(seed, t)).
std::uint64_t trial_seed(std::uint64_t seed, int trial);

}  // namespace vstcs::vst
