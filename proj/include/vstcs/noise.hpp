#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vstcs/sensing.hpp"

namespace vstcs::noise {

// Measurement model y ~ alpha * Poisson(Phi x) + Normal(g, sigma^2).
struct NoiseModel {
  enum class Kind { poisson, poisson_gaussian };
  Kind kind = Kind::poisson;
  double sigma = 0;  // Gaussian std; 0 for pure Poisson
  double alpha = 1;  // gain
  double g = 0;      // Gaussian mean

  static NoiseModel poisson() { return {}; }
  static NoiseModel poisson_gaussian(double sigma, double alpha = 1,
                                     double g = 0);
};

struct MeasurementSet {
  Eigen::VectorXd y;
  Eigen::VectorXd rates;  // gamma = Phi x
  NoiseModel model;
  std::uint64_t seed = 0;
  std::vector<int> rejected_indices;  // sorted; filled by saturation_reject

  int n_total() const { return static_cast<int>(y.size()); }
  int n_retained() const {
    return n_total() - static_cast<int>(rejected_indices.size());
  }
  bool is_rejected(int i) const;
};

// Exact, independent Poisson draws, one substream per coordinate, so the
// result does not depend on evaluation order or thread count.
Eigen::VectorXd sample_poisson(const Eigen::VectorXd& rates,
                               std::uint64_t seed);

MeasurementSet sample_measurements(const Eigen::VectorXd& rates,
                                   const NoiseModel& model,
                                   std::uint64_t seed);
MeasurementSet sample_measurements(const sensing::SensingMatrix& matrix,
                                   const Eigen::VectorXd& x,
                                   const NoiseModel& model,
                                   std::uint64_t seed);

// Records indices with y_i + d < 0; downstream consumers drop those rows.
MeasurementSet saturation_reject(const MeasurementSet& measurements, double d);

// CSV dump with columns: index, rate, y, rejected.
void write_measurements_csv(const std::string& path,
                            const MeasurementSet& measurements);

}  // namespace vstcs::noise
