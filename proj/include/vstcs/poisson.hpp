#pragma once

#include <cstdint>

#include "vstcs/rng.hpp"

namespace vstcs::rng {

// Exact Poisson sampler.
//
// lambda < 30 uses inversion by sequential search; lambda >= 30 uses
// Hormann's PTRS transformed-rejection method. Both are exact (no normal
// approximation), which matters because the residual-statistics experiments
// resolve variance differences well below 0.1.
std::int64_t sample_poisson(double lambda, Xoshiro256pp& gen);

// Per-rate cache of sampler constants; pays off when a fixed rate vector is
// sampled over thousands of Monte-Carlo trials.
class PoissonRate {
 public:
  explicit PoissonRate(double lambda);
  std::int64_t sample(Xoshiro256pp& gen) const;
  double lambda() const { return lambda_; }

 private:
  double lambda_ = 0;
  // inversion (lambda < 30)
  double exp_neg_lambda_ = 1;
  // PTRS (lambda >= 30)
  double b_ = 0, a_ = 0, log_inv_alpha_ = 0, vr_ = 0, log_lambda_ = 0;
};

}  // namespace vstcs::rng
