#include "vstcs/vst.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vstcs/poisson.hpp"
#include "vstcs/rng.hpp"

namespace vstcs::vst {

namespace {
constexpr std::uint64_t kTrialTag = 0x5452494Cu;
constexpr std::uint64_t kPoissonTag = 0x504F4953u;  // must match noise.cpp
constexpr std::uint64_t kGaussTag = 0x47415553u;    // must match noise.cpp
}  // namespace

VstSpec VstSpec::gat(double sigma, double alpha, double g, double c) {
  if (sigma < 0) throw std::invalid_argument("VstSpec::gat: sigma >= 0");
  if (!(alpha > 0)) throw std::invalid_argument("VstSpec::gat: alpha > 0");
  if (c < 0) throw std::invalid_argument("VstSpec::gat: c >= 0");
  return {Family::generalized_anscombe, c, sigma, alpha, g};
}

double VstSpec::offset() const {
  switch (family) {
    case Family::anscombe:
    case Family::bartlett:
      return c;
    case Family::generalized_anscombe:
      return c * alpha + (sigma * sigma - alpha * g) / alpha;
    case Family::freeman_tukey:
      return 0.0;
  }
  return c;
}

double apply_vst_scalar(double y, const VstSpec& spec) {
  switch (spec.family) {
    case VstSpec::Family::anscombe:
    case VstSpec::Family::bartlett: {
      const double arg = y + spec.c;
      if (arg < 0) throw std::domain_error("apply_vst: negative argument");
      return std::sqrt(arg);
    }
    case VstSpec::Family::generalized_anscombe: {
      const double arg = spec.alpha * y + spec.c * spec.alpha * spec.alpha +
                         spec.sigma * spec.sigma - spec.alpha * spec.g;
      if (arg < 0) throw std::domain_error("apply_vst: negative argument");
      return std::sqrt(arg) / spec.alpha;
    }
    case VstSpec::Family::freeman_tukey: {
      if (y < 0) throw std::domain_error("apply_vst: negative argument");
      return std::sqrt(y) + std::sqrt(y + 1.0);
    }
  }
  throw std::logic_error("apply_vst: unknown family");
}

Eigen::VectorXd apply_vst(const Eigen::VectorXd& y, const VstSpec& spec) {
  Eigen::VectorXd t(y.size());
  for (int i = 0; i < y.size(); ++i) {
    try {
      t(i) = apply_vst_scalar(y(i), spec);
    } catch (const std::domain_error&) {
      throw std::domain_error(
          "apply_vst: negative argument under the square root at index " +
          std::to_string(i) + " (apply saturation rejection first)");
    }
  }
  return t;
}

double residual_magnitude(const Eigen::VectorXd& y,
                          const Eigen::VectorXd& rates, const VstSpec& spec,
                          const std::vector<int>* rejected) {
  if (y.size() != rates.size()) {
    throw std::invalid_argument("residual_magnitude: dimension mismatch");
  }
  double acc = 0;
  std::size_t r = 0;
  for (int i = 0; i < y.size(); ++i) {
    if (rejected && r < rejected->size() && (*rejected)[r] == i) {
      ++r;
      continue;
    }
    double diff;
    try {
      diff = apply_vst_scalar(y(i), spec) - apply_vst_scalar(rates(i), spec);
    } catch (const std::domain_error&) {
      throw std::domain_error(
          "residual_magnitude: negative argument at index " +
          std::to_string(i) + " (apply saturation rejection first)");
    }
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

double residual_magnitude(const noise::MeasurementSet& measurements,
                          const VstSpec& spec) {
  return residual_magnitude(measurements.y, measurements.rates, spec,
                            &measurements.rejected_indices);
}

KsResult ks_test(const Eigen::VectorXd& samples, double mu, double var) {
  const int n = static_cast<int>(samples.size());
  if (n < 8) throw std::invalid_argument("ks_test: need at least 8 samples");
  if (!(var > 0)) throw std::invalid_argument("ks_test: degenerate variance");
  std::vector<double> xs(samples.data(), samples.data() + n);
  std::sort(xs.begin(), xs.end());
  const double sd = std::sqrt(var);
  double d = 0;
  for (int i = 0; i < n; ++i) {
    const double f = 0.5 * std::erfc(-(xs[i] - mu) / (sd * std::sqrt(2.0)));
    d = std::max(d, (i + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  KsResult r;
  r.statistic = d;
  const double root_n = std::sqrt(static_cast<double>(n));
  r.reject_1pct = d > 1.628 / root_n;
  r.reject_5pct = d > 1.358 / root_n;
  return r;
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  return rng::derive_key(seed, kTrialTag, static_cast<std::uint64_t>(trial));
}

namespace {

// One Monte-Carlo trial: sample y, apply saturation rejection with the
// spec's offset, return the residual magnitude over retained coordinates.
// Stream layout matches noise::sample_measurements for the same trial seed.
double one_trial(const Eigen::VectorXd& rates,
                 const std::vector<rng::PoissonRate>& cache,
                 const noise::NoiseModel& model, const VstSpec& spec,
                 const Eigen::VectorXd& t_rates, std::uint64_t tseed) {
  const int n = static_cast<int>(rates.size());
  const double off = spec.offset();
  const bool gaussian =
      model.kind == noise::NoiseModel::Kind::poisson_gaussian &&
      model.sigma > 0;
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    auto pg = rng::make_stream(tseed, kPoissonTag, static_cast<std::uint64_t>(i));
    double y = model.alpha * static_cast<double>(cache[i].sample(pg));
    if (gaussian) {
      auto gg = rng::make_stream(tseed, kGaussTag, static_cast<std::uint64_t>(i));
      y += model.g + model.sigma * rng::standard_normal(gg);
    } else {
      y += model.g;
    }
    if (y + off < 0) continue;  // saturation rejection
    const double diff = apply_vst_scalar(y, spec) - t_rates(i);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

ResidualStats residual_stats_impl(const Eigen::VectorXd& rates,
                                  const noise::NoiseModel& model,
                                  const VstSpec& spec, int n_trials,
                                  std::uint64_t seed, bool parallel) {
  if (n_trials < 2) {
    throw std::invalid_argument("residual_statistics: n_trials >= 2");
  }
  std::vector<rng::PoissonRate> cache;
  cache.reserve(static_cast<std::size_t>(rates.size()));
  for (int i = 0; i < rates.size(); ++i) cache.emplace_back(rates(i));
  const Eigen::VectorXd t_rates = apply_vst(rates, spec);

  ResidualStats stats;
  stats.n_trials = n_trials;
  stats.samples.resize(n_trials);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < n_trials; ++t) {
      stats.samples(t) = one_trial(rates, cache, model, spec, t_rates,
                                   trial_seed(seed, t));
    }
  } else {
    for (int t = 0; t < n_trials; ++t) {
      stats.samples(t) = one_trial(rates, cache, model, spec, t_rates,
                                   trial_seed(seed, t));
    }
  }

  // Reduce in fixed trial order; independent of the parallel schedule.
  double sum = 0;
  for (int t = 0; t < n_trials; ++t) sum += stats.samples(t);
  stats.mean = sum / n_trials;
  double ss = 0;
  for (int t = 0; t < n_trials; ++t) {
    const double dev = stats.samples(t) - stats.mean;
    ss += dev * dev;
  }
  stats.variance = ss / (n_trials - 1);
  if (n_trials >= 8 && stats.variance > 0) {
    const KsResult ks = ks_test(stats.samples, stats.mean, stats.variance);
    stats.ks_statistic = ks.statistic;
    stats.ks_reject_1pct = ks.reject_1pct;
  } else {
    // Too few samples (or a degenerate spread) to test; report the
    // distribution comparison as unavailable rather than failed.
    stats.ks_statistic = 0.0;
    stats.ks_reject_1pct = false;
  }
  return stats;
}

}  // namespace

ResidualStats residual_statistics(const Eigen::VectorXd& rates,
                                  const noise::NoiseModel& model,
                                  const VstSpec& spec, int n_trials,
                                  std::uint64_t seed) {
  return residual_stats_impl(rates, model, spec, n_trials, seed, true);
}

ResidualStats residual_statistics(const sensing::SensingMatrix& matrix,
                                  const Eigen::VectorXd& x,
                                  const noise::NoiseModel& model,
                                  const VstSpec& spec, int n_trials,
                                  std::uint64_t seed) {
  return residual_statistics(Eigen::VectorXd(matrix.phi * x), model, spec,
                             n_trials, seed);
}

ResidualStats residual_statistics_serial(const Eigen::VectorXd& rates,
                                         const noise::NoiseModel& model,
                                         const VstSpec& spec, int n_trials,
                                         std::uint64_t seed) {
  return residual_stats_impl(rates, model, spec, n_trials, seed, false);
}

}  // namespace vstcs::vst
