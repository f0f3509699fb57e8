#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vstcs::sensing {

// Random binary sensing operator for a physically realizable optical system.
//
// phi has entries in {0, 1/N} (non-negative, every column sums to <= 1) and
// tilde = Z/sqrt(N) is the +/- companion matrix whose restricted isometry
// drives the recovery guarantees. The two are linked entrywise by
//   phi = sqrt(p(1-p)/N) * tilde + (1-p)/N.
struct SensingMatrix {
  int n_rows = 0;  // N, number of measurements
  int n_cols = 0;  // m, signal dimension
  double p = 0.5;  // probability of a zero entry
  std::uint64_t seed = 0;
  Eigen::MatrixXd tilde;
  Eigen::MatrixXd phi;
};

// Draws entries i.i.d.: 0 with probability p, 1/N otherwise. Deterministic
// in seed; identical output on every platform and thread count.
SensingMatrix generate_sensing_matrix(int n_rows, int n_cols, double p,
                                      std::uint64_t seed);

struct FluxReport {
  double max_col_sum = 0;
  double min_entry = 0;
  bool ok = false;
};

// ok iff all entries are non-negative and every column sums to <= 1 (+1e-12).
FluxReport flux_check(const Eigen::MatrixXd& phi);

// max_i (phi x)_i for x >= 0. Throws std::domain_error on negative entries;
// asserts the flux consequence max <= ||x||_1 / N + 1e-12.
double max_measurement_bound(const SensingMatrix& matrix,
                             const Eigen::VectorXd& x);

// Largest deviation of the entrywise identity phi = sqrt(p(1-p)/N)*tilde +
// (1-p)/N over all entries; generated matrices keep this below 1e-12.
double reconstruction_identity_error(const SensingMatrix& matrix);

enum class RicMode { exhaustive, sampled };

struct RicEstimate {
  int order = 0;              // 2s
  double delta_lower = 0;     // certified lower bound on delta_{2s}
  RicMode method = RicMode::exhaustive;
  std::uint64_t supports_checked = 0;
};

// Scans supports T of size 2s and records the worst singular-value deviation
// of the corresponding column submatrix of B = tilde * psi:
//   delta_lower = max_T max(sigma_max^2 - 1, 1 - sigma_min^2).
// Exhaustive mode visits all C(m, 2s) supports (requires C(m,2s) <= budget)
// and yields the exact RIC; sampled mode visits `budget` random supports and
// yields a lower bound. OpenMP-parallel with a deterministic max reduction.
RicEstimate estimate_ric(const Eigen::MatrixXd& tilde,
                         const Eigen::MatrixXd& psi, int s, RicMode mode,
                         std::uint64_t budget, std::uint64_t seed);
RicEstimate estimate_ric(const SensingMatrix& matrix,
                         const Eigen::MatrixXd& psi, int s, RicMode mode,
                         std::uint64_t budget, std::uint64_t seed);

// Serial reference for estimate_ric; used by tests and the benchmark.
RicEstimate estimate_ric_serial(const Eigen::MatrixXd& tilde,
                                const Eigen::MatrixXd& psi, int s, RicMode mode,
                                std::uint64_t budget, std::uint64_t seed);

// Text format with exact round-trip: header "N m p seed", then row-major phi
// entries as rational tokens `0` or `1/N`. tilde is rebuilt from phi and p.
void save_matrix(const std::string& path, const SensingMatrix& matrix);
SensingMatrix load_matrix(const std::string& path);

// C(n, k) with saturation at 2^63-1; used for exhaustive-mode budgeting.
std::uint64_t binomial_or_saturate(int n, int k);

}  // namespace vstcs::sensing
