#include "vstcs/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "vstcs/rng.hpp"

namespace vstcs::sensing {

namespace {
constexpr std::uint64_t kMatrixTag = 0x53454E53u;  // stream tag for generation
constexpr std::uint64_t kRicTag = 0x52494353u;     // stream tag for sampled RIC
}  // namespace

SensingMatrix generate_sensing_matrix(int n_rows, int n_cols, double p,
                                      std::uint64_t seed) {
  if (n_rows < 1 || n_cols < 1) {
    throw std::invalid_argument("generate_sensing_matrix: N and m must be >= 1");
  }
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::invalid_argument("generate_sensing_matrix: p must lie in (0,1)");
  }
  SensingMatrix M;
  M.n_rows = n_rows;
  M.n_cols = n_cols;
  M.p = p;
  M.seed = seed;
  M.tilde.resize(n_rows, n_cols);
  M.phi.resize(n_rows, n_cols);

  const double inv_n = 1.0 / static_cast<double>(n_rows);
  const double sqrt_n = std::sqrt(static_cast<double>(n_rows));
  const double z_zero = -std::sqrt((1.0 - p) / p) / sqrt_n;
  const double z_one = std::sqrt(p / (1.0 - p)) / sqrt_n;

  auto gen = rng::make_stream(seed, kMatrixTag);
  for (int i = 0; i < n_rows; ++i) {
    for (int j = 0; j < n_cols; ++j) {
      const bool zero = gen.uniform() < p;
      M.phi(i, j) = zero ? 0.0 : inv_n;
      M.tilde(i, j) = zero ? z_zero : z_one;
    }
  }
  return M;
}

FluxReport flux_check(const Eigen::MatrixXd& phi) {
  FluxReport r;
  r.min_entry = phi.size() > 0 ? phi.minCoeff() : 0.0;
  r.max_col_sum = phi.size() > 0 ? phi.colwise().sum().maxCoeff() : 0.0;
  r.ok = r.min_entry >= 0.0 && r.max_col_sum <= 1.0 + 1e-12;
  return r;
}

double max_measurement_bound(const SensingMatrix& matrix,
                             const Eigen::VectorXd& x) {
  if (x.size() != matrix.n_cols) {
    throw std::invalid_argument("max_measurement_bound: dimension mismatch");
  }
  if ((x.array() < 0.0).any()) {
    throw std::domain_error("max_measurement_bound: x must be non-negative");
  }
  const double value =
      x.size() == 0 ? 0.0 : (matrix.phi * x).maxCoeff();
  const double limit = x.lpNorm<1>() / matrix.n_rows + 1e-12;
  if (value > limit) {
    throw std::logic_error("max_measurement_bound: flux bound violated");
  }
  return value;
}

double reconstruction_identity_error(const SensingMatrix& matrix) {
  const double scale =
      std::sqrt(matrix.p * (1.0 - matrix.p) / matrix.n_rows);
  const double shift = (1.0 - matrix.p) / matrix.n_rows;
  return (matrix.phi - (scale * matrix.tilde).array().matrix() -
          Eigen::MatrixXd::Constant(matrix.n_rows, matrix.n_cols, shift))
      .cwiseAbs()
      .maxCoeff();
}

std::uint64_t binomial_or_saturate(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  const std::uint64_t cap = std::numeric_limits<std::int64_t>::max();
  std::uint64_t c = 1;
  for (int i = 1; i <= k; ++i) {
    const double next = static_cast<double>(c) * (n - k + i) / i;
    if (next >= static_cast<double>(cap)) return cap;
    c = c * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  }
  return c;
}

namespace {

// All size-k subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<int>> all_supports(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(k);
  for (int i = 0; i < k; ++i) cur[i] = i;
  for (;;) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[i] == n - k + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

std::vector<std::vector<int>> sampled_supports(int n, int k,
                                               std::uint64_t count,
                                               std::uint64_t seed) {
  std::vector<std::vector<int>> out;
  out.reserve(count);
  std::vector<int> pool(n);
  auto gen = rng::make_stream(seed, kRicTag);
  for (std::uint64_t t = 0; t < count; ++t) {
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> cur(k);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(gen.uniform() * (n - i));
      std::swap(pool[i], pool[std::min(j, n - 1)]);
      cur[i] = pool[i];
    }
    std::sort(cur.begin(), cur.end());
    out.push_back(std::move(cur));
  }
  return out;
}

double support_delta(const Eigen::MatrixXd& B, const std::vector<int>& T) {
  const int k = static_cast<int>(T.size());
  Eigen::MatrixXd sub(B.rows(), k);
  for (int j = 0; j < k; ++j) sub.col(j) = B.col(T[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub.transpose() * sub);
  const auto& ev = es.eigenvalues();
  return std::max(ev(k - 1) - 1.0, 1.0 - ev(0));
}

RicEstimate ric_scan(const Eigen::MatrixXd& tilde, const Eigen::MatrixXd& psi,
                     int s, RicMode mode, std::uint64_t budget,
                     std::uint64_t seed, bool parallel) {
  const int m = static_cast<int>(psi.cols());
  const int order = 2 * s;
  if (s < 1 || order > std::min<int>(static_cast<int>(tilde.rows()), m)) {
    throw std::invalid_argument("estimate_ric: need 1 <= 2s <= min(N, m)");
  }
  std::vector<std::vector<int>> supports;
  if (mode == RicMode::exhaustive) {
    const std::uint64_t total = binomial_or_saturate(m, order);
    if (total > budget) {
      throw std::invalid_argument(
          "estimate_ric: exhaustive mode needs C(m,2s) <= budget");
    }
    supports = all_supports(m, order);
  } else {
    supports = sampled_supports(m, order, budget, seed);
  }

  const Eigen::MatrixXd B = tilde * psi;
  const int n_supports = static_cast<int>(supports.size());
  std::vector<double> deltas(n_supports);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_supports; ++i) {
      deltas[i] = support_delta(B, supports[i]);
    }
  } else {
    for (int i = 0; i < n_supports; ++i) {
      deltas[i] = support_delta(B, supports[i]);
    }
  }

  RicEstimate est;
  est.order = order;
  est.method = mode;
  est.supports_checked = supports.size();
  est.delta_lower = 0.0;
  for (double d : deltas) est.delta_lower = std::max(est.delta_lower, d);
  return est;
}

}  // namespace

RicEstimate estimate_ric(const Eigen::MatrixXd& tilde,
                         const Eigen::MatrixXd& psi, int s, RicMode mode,
                         std::uint64_t budget, std::uint64_t seed) {
  return ric_scan(tilde, psi, s, mode, budget, seed, /*parallel=*/true);
}

RicEstimate estimate_ric(const SensingMatrix& matrix,
                         const Eigen::MatrixXd& psi, int s, RicMode mode,
                         std::uint64_t budget, std::uint64_t seed) {
  return ric_scan(matrix.tilde, psi, s, mode, budget, seed, /*parallel=*/true);
}

RicEstimate estimate_ric_serial(const Eigen::MatrixXd& tilde,
                                const Eigen::MatrixXd& psi, int s, RicMode mode,
                                std::uint64_t budget, std::uint64_t seed) {
  return ric_scan(tilde, psi, s, mode, budget, seed, /*parallel=*/false);
}

void save_matrix(const std::string& path, const SensingMatrix& matrix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_matrix: cannot open " + path);
  char header[128];
  std::snprintf(header, sizeof(header), "%d %d %.17g %llu\n", matrix.n_rows,
                matrix.n_cols, matrix.p,
                static_cast<unsigned long long>(matrix.seed));
  out << header;
  for (int i = 0; i < matrix.n_rows; ++i) {
    for (int j = 0; j < matrix.n_cols; ++j) {
      if (j) out << ' ';
      if (matrix.phi(i, j) == 0.0) {
        out << '0';
      } else {
        out << "1/" << matrix.n_rows;
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_matrix: write failed for " + path);
}

SensingMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_matrix: cannot open " + path);
  SensingMatrix M;
  unsigned long long seed = 0;
  if (!(in >> M.n_rows >> M.n_cols >> M.p >> seed)) {
    throw std::runtime_error("load_matrix: bad header in " + path);
  }
  M.seed = seed;
  if (M.n_rows < 1 || M.n_cols < 1 || !(M.p > 0.0 && M.p < 1.0)) {
    throw std::runtime_error("load_matrix: invalid header values in " + path);
  }
  M.phi.resize(M.n_rows, M.n_cols);
  M.tilde.resize(M.n_rows, M.n_cols);
  const double sqrt_n = std::sqrt(static_cast<double>(M.n_rows));
  const double z_zero = -std::sqrt((1.0 - M.p) / M.p) / sqrt_n;
  const double z_one = std::sqrt(M.p / (1.0 - M.p)) / sqrt_n;
  std::string tok;
  for (int i = 0; i < M.n_rows; ++i) {
    for (int j = 0; j < M.n_cols; ++j) {
      if (!(in >> tok)) {
        throw std::runtime_error("load_matrix: truncated matrix in " + path);
      }
      if (tok == "0") {
        M.phi(i, j) = 0.0;
        M.tilde(i, j) = z_zero;
      } else if (tok.rfind("1/", 0) == 0) {
        const long den = std::stol(tok.substr(2));
        if (den != M.n_rows) {
          throw std::runtime_error("load_matrix: entry denominator != N");
        }
        M.phi(i, j) = 1.0 / static_cast<double>(den);
        M.tilde(i, j) = z_one;
      } else {
        throw std::runtime_error("load_matrix: bad entry token '" + tok + "'");
      }
    }
  }
  return M;
}

}  // namespace vstcs::sensing
