#include "vstcs/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "vstcs/io.hpp"
#include "vstcs/poisson.hpp"
#include "vstcs/rng.hpp"

namespace vstcs::noise {

namespace {
constexpr std::uint64_t kPoissonTag = 0x504F4953u;
constexpr std::uint64_t kGaussTag = 0x47415553u;
}  // namespace

NoiseModel NoiseModel::poisson_gaussian(double sigma, double alpha, double g) {
  if (sigma < 0) throw std::invalid_argument("NoiseModel: sigma >= 0");
  if (!(alpha > 0)) throw std::invalid_argument("NoiseModel: alpha > 0");
  NoiseModel m;
  m.kind = Kind::poisson_gaussian;
  m.sigma = sigma;
  m.alpha = alpha;
  m.g = g;
  return m;
}

bool MeasurementSet::is_rejected(int i) const {
  return std::binary_search(rejected_indices.begin(), rejected_indices.end(),
                            i);
}

Eigen::VectorXd sample_poisson(const Eigen::VectorXd& rates,
                               std::uint64_t seed) {
  Eigen::VectorXd y(rates.size());
  for (int i = 0; i < rates.size(); ++i) {
    if (!(rates(i) >= 0.0) || !std::isfinite(rates(i))) {
      throw std::domain_error("sample_poisson: rate " + std::to_string(i) +
                              " must be finite and >= 0");
    }
    auto gen = rng::make_stream(seed, kPoissonTag, static_cast<std::uint64_t>(i));
    y(i) = static_cast<double>(rng::sample_poisson(rates(i), gen));
  }
  return y;
}

MeasurementSet sample_measurements(const Eigen::VectorXd& rates,
                                   const NoiseModel& model,
                                   std::uint64_t seed) {
  MeasurementSet ms;
  ms.rates = rates;
  ms.model = model;
  ms.seed = seed;
  ms.y = model.alpha * sample_poisson(rates, seed);
  if (model.kind == NoiseModel::Kind::poisson_gaussian && model.sigma > 0) {
    for (int i = 0; i < ms.y.size(); ++i) {
      auto gen =
          rng::make_stream(seed, kGaussTag, static_cast<std::uint64_t>(i));
      ms.y(i) += model.g + model.sigma * rng::standard_normal(gen);
    }
  } else if (model.g != 0) {
    ms.y.array() += model.g;
  }
  return ms;
}

MeasurementSet sample_measurements(const sensing::SensingMatrix& matrix,
                                   const Eigen::VectorXd& x,
                                   const NoiseModel& model,
                                   std::uint64_t seed) {
  if (x.size() != matrix.n_cols) {
    throw std::invalid_argument("sample_measurements: dimension mismatch");
  }
  if ((x.array() < 0.0).any()) {
    throw std::domain_error("sample_measurements: x must be non-negative");
  }
  return sample_measurements(Eigen::VectorXd(matrix.phi * x), model, seed);
}

MeasurementSet saturation_reject(const MeasurementSet& measurements,
                                 double d) {
  MeasurementSet out = measurements;
  out.rejected_indices.clear();
  for (int i = 0; i < out.y.size(); ++i) {
    if (out.y(i) + d < 0.0) out.rejected_indices.push_back(i);
  }
  return out;
}

void write_measurements_csv(const std::string& path,
                            const MeasurementSet& measurements) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_measurements_csv: cannot open " + path);
  }
  out << "index,rate,y,rejected\n";
  for (int i = 0; i < measurements.y.size(); ++i) {
    out << i << ',' << io::format_double(measurements.rates(i)) << ','
        << io::format_double(measurements.y(i)) << ','
        << (measurements.is_rejected(i) ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write_measurements_csv: write failed");
}

}  // namespace vstcs::noise
