#include "vstcs/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vstcs/poisson.hpp"

namespace vstcs::rng {

double standard_normal(Xoshiro256pp& gen) {
  const double u1 = gen.uniform_pos();
  const double u2 = gen.uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

PoissonRate::PoissonRate(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::domain_error("PoissonRate: rate must be finite and >= 0");
  }
  if (lambda < 30.0) {
    exp_neg_lambda_ = std::exp(-lambda);
  } else {
    const double slam = std::sqrt(lambda);
    log_lambda_ = std::log(lambda);
    b_ = 0.931 + 2.53 * slam;
    a_ = -0.059 + 0.02483 * b_;
    log_inv_alpha_ = std::log(1.1239 + 1.1328 / (b_ - 3.4));
    vr_ = 0.9277 - 3.6224 / (b_ - 2.0);
  }
}

std::int64_t PoissonRate::sample(Xoshiro256pp& gen) const {
  if (lambda_ == 0.0) return 0;
  if (lambda_ < 30.0) {
    // Inversion by sequential search over the pmf.
    double u = gen.uniform();
    double p = exp_neg_lambda_;
    double cum = p;
    std::int64_t k = 0;
    // Hard cap far beyond any realistic excursion for lambda < 30.
    while (u > cum && k < 400) {
      ++k;
      p *= lambda_ / static_cast<double>(k);
      cum += p;
    }
    return k;
  }
  // PTRS (Hormann 1993): exact transformed rejection for lambda >= 10.
  for (;;) {
    const double u = gen.uniform() - 0.5;
    const double v = gen.uniform_pos();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a_ / us + b_) * u + lambda_ + 0.43);
    if (us >= 0.07 && v <= vr_) return static_cast<std::int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    const std::int64_t k = static_cast<std::int64_t>(kf);
    const double lhs =
        std::log(v) + log_inv_alpha_ - std::log(a_ / (us * us) + b_);
    const double rhs = kf * log_lambda_ - lambda_ -
                       std::lgamma(kf + 1.0);
    if (lhs <= rhs) return k;
  }
}

std::int64_t sample_poisson(double lambda, Xoshiro256pp& gen) {
  return PoissonRate(lambda).sample(gen);
}

}  // namespace vstcs::rng
