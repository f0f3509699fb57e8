// Compares the OpenMP kernels against their serial reference
// implementations: residual-magnitude Monte Carlo and RIC support scans.
// Results must match bit-for-bit; only the wall time may differ.

#include <omp.h>

#include <chrono>
#include <cstdio>

#include "vstcs/rng.hpp"
#include "vstcs/sensing.hpp"
#include "vstcs/signals.hpp"
#include "vstcs/vst.hpp"

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

int main() {
  using namespace vstcs;
  std::printf("threads available: %d\n", omp_get_max_threads());

  // residual statistics: N = 500, m = 1000, 2000 trials
  const auto mat = sensing::generate_sensing_matrix(500, 1000, 0.5, 7);
  const Eigen::VectorXd x = signals::uniform_signal(1000, 1e3, 11);
  const Eigen::VectorXd rates = mat.phi * x;
  const auto model = noise::NoiseModel::poisson();
  const auto spec = vst::VstSpec::anscombe();

  vst::ResidualStats serial_stats, parallel_stats;
  const double t_serial = seconds([&] {
    serial_stats = vst::residual_statistics_serial(rates, model, spec, 2000, 3);
  });
  const double t_parallel = seconds([&] {
    parallel_stats = vst::residual_statistics(rates, model, spec, 2000, 3);
  });
  const bool same_stats =
      serial_stats.mean == parallel_stats.mean &&
      serial_stats.variance == parallel_stats.variance &&
      serial_stats.samples == parallel_stats.samples;
  std::printf("residual_statistics  serial %.3fs  openmp %.3fs  speedup %.2fx  identical %s\n",
              t_serial, t_parallel, t_serial / t_parallel,
              same_stats ? "yes" : "NO");

  // RIC scan: m = 24, N = 16, order 4, exhaustive (10626 supports)
  const auto small = sensing::generate_sensing_matrix(16, 24, 0.5, 5);
  const auto basis = signals::make_dct_basis(24);
  sensing::RicEstimate serial_ric, parallel_ric;
  const double r_serial = seconds([&] {
    serial_ric = sensing::estimate_ric_serial(small.tilde, basis.matrix, 2,
                                              sensing::RicMode::exhaustive,
                                              1000000, 1);
  });
  const double r_parallel = seconds([&] {
    parallel_ric = sensing::estimate_ric(small.tilde, basis.matrix, 2,
                                         sensing::RicMode::exhaustive,
                                         1000000, 1);
  });
  std::printf("estimate_ric         serial %.3fs  openmp %.3fs  speedup %.2fx  identical %s\n",
              r_serial, r_parallel, r_serial / r_parallel,
              serial_ric.delta_lower == parallel_ric.delta_lower ? "yes" : "NO");
  return 0;
}
