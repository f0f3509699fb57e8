#include "vstcs/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vstcs/rng.hpp"

namespace vstcs::signals {

namespace {
constexpr std::uint64_t kSignalTag = 0x5349474Eu;
constexpr std::uint64_t kUniformTag = 0x554E4946u;
}  // namespace

OrthoBasis make_identity_basis(int m) {
  if (m < 1) throw std::invalid_argument("make_identity_basis: m >= 1");
  return {OrthoBasis::Kind::identity, m, 0, Eigen::MatrixXd::Identity(m, m)};
}

OrthoBasis make_dct_basis(int m) {
  if (m < 1) throw std::invalid_argument("make_dct_basis: m >= 1");
  OrthoBasis b;
  b.kind = OrthoBasis::Kind::dct1d;
  b.dim = m;
  b.matrix.resize(m, m);
  const double pi = std::numbers::pi;
  for (int k = 0; k < m; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (int n = 0; n < m; ++n) {
      b.matrix(n, k) = scale * std::cos(pi * (2.0 * n + 1.0) * k / (2.0 * m));
    }
  }
  return b;
}

OrthoBasis make_dct2d_basis(int patch_side) {
  if (patch_side < 1) throw std::invalid_argument("make_dct2d_basis: side >= 1");
  const OrthoBasis d1 = make_dct_basis(patch_side);
  const int m = patch_side * patch_side;
  OrthoBasis b;
  b.kind = OrthoBasis::Kind::dct2d;
  b.dim = m;
  b.patch_side = patch_side;
  b.matrix.resize(m, m);
  // Row-major vectorization: pixel (r,c) -> r*side + c, frequency (kr,kc)
  // likewise, so the matrix is kron(D1, D1).
  for (int r = 0; r < patch_side; ++r) {
    for (int c = 0; c < patch_side; ++c) {
      for (int kr = 0; kr < patch_side; ++kr) {
        for (int kc = 0; kc < patch_side; ++kc) {
          b.matrix(r * patch_side + c, kr * patch_side + kc) =
              d1.matrix(r, kr) * d1.matrix(c, kc);
        }
      }
    }
  }
  return b;
}

SparseSignal generate_sparse_signal(int m, int s, double intensity,
                                    const OrthoBasis& basis,
                                    std::uint64_t seed) {
  if (basis.dim != m) {
    throw std::invalid_argument("generate_sparse_signal: basis dim != m");
  }
  if (s < 1 || s > m - 1) {
    throw std::invalid_argument(
        "generate_sparse_signal: need 1 <= s <= m-1 (DC reserved)");
  }
  if (!(intensity > 0.0)) {
    throw std::invalid_argument("generate_sparse_signal: intensity > 0");
  }
  auto gen = rng::make_stream(seed, kSignalTag);

  // Support drawn uniformly among non-DC indices (partial Fisher-Yates).
  std::vector<int> pool(m - 1);
  for (int i = 0; i < m - 1; ++i) pool[i] = i + 1;
  SparseSignal sig;
  sig.s = s;
  sig.support.resize(s);
  for (int i = 0; i < s; ++i) {
    const int j = i + static_cast<int>(gen.uniform() * (m - 1 - i));
    std::swap(pool[i], pool[std::min(j, m - 2)]);
    sig.support[i] = pool[i];
  }
  std::sort(sig.support.begin(), sig.support.end());

  sig.theta = Eigen::VectorXd::Zero(m);
  for (int idx : sig.support) sig.theta(idx) = gen.uniform();

  Eigen::VectorXd x = basis.matrix * sig.theta;

  // DC adjustment: smallest theta_0 with min(x) exactly 0.
  const Eigen::VectorXd dc = basis.matrix.col(0);
  double theta0 = 0.0;
  bool any = false;
  for (int j = 0; j < m; ++j) {
    if (dc(j) > 1e-14) {
      const double cand = -x(j) / dc(j);
      if (!any || cand > theta0) theta0 = cand, any = true;
    } else if (x(j) < -1e-12) {
      throw std::runtime_error(
          "generate_sparse_signal: DC column cannot lift this signal");
    }
  }
  if (any) {
    sig.theta(0) = theta0;
    x += theta0 * dc;
  }
  for (int j = 0; j < m; ++j) x(j) = std::max(x(j), 0.0);

  const double raw = x.sum();
  if (!(raw > 0.0)) {
    throw std::runtime_error("generate_sparse_signal: degenerate draw");
  }
  const double scale = intensity / raw;
  sig.theta *= scale;
  sig.x = x * scale;
  sig.intensity = intensity;
  return sig;
}

Eigen::VectorXd uniform_signal(int m, double intensity, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("uniform_signal: m >= 1");
  if (!(intensity > 0.0)) {
    throw std::invalid_argument("uniform_signal: intensity > 0");
  }
  auto gen = rng::make_stream(seed, kUniformTag);
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x(i) = gen.uniform();
  const double raw = x.sum();
  if (!(raw > 0.0)) throw std::runtime_error("uniform_signal: degenerate draw");
  return x * (intensity / raw);
}

int effective_l0(const Eigen::VectorXd& theta, double tol) {
  if (theta.size() == 0) return 0;
  const double threshold = tol * theta.cwiseAbs().maxCoeff();
  int count = 0;
  for (int i = 0; i < theta.size(); ++i) {
    if (std::abs(theta(i)) > threshold) ++count;
  }
  return count;
}

std::vector<Eigen::VectorXd> extract_patches(const Eigen::MatrixXd& image,
                                             int patch_side, int stride) {
  if (patch_side < 1 || stride < 1) {
    throw std::invalid_argument("extract_patches: patch_side, stride >= 1");
  }
  if (patch_side > image.rows() || patch_side > image.cols()) {
    throw std::invalid_argument("extract_patches: patch larger than image");
  }
  std::vector<Eigen::VectorXd> patches;
  for (int r = 0; r + patch_side <= image.rows(); r += stride) {
    for (int c = 0; c + patch_side <= image.cols(); c += stride) {
      Eigen::VectorXd v(patch_side * patch_side);
      for (int i = 0; i < patch_side; ++i) {
        for (int j = 0; j < patch_side; ++j) {
          v(i * patch_side + j) = image(r + i, c + j);
        }
      }
      patches.push_back(std::move(v));
    }
  }
  return patches;
}

Eigen::MatrixXd assemble_patches(const std::vector<Eigen::VectorXd>& patches,
                                 int rows, int cols, int patch_side,
                                 int stride) {
  if (patch_side < 1 || stride < 1 || rows < patch_side || cols < patch_side) {
    throw std::invalid_argument("assemble_patches: inconsistent geometry");
  }
  std::size_t expected = 0;
  for (int r = 0; r + patch_side <= rows; r += stride) {
    for (int c = 0; c + patch_side <= cols; c += stride) ++expected;
  }
  if (patches.size() != expected) {
    throw std::invalid_argument("assemble_patches: patch count mismatch");
  }
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(rows, cols);
  std::size_t idx = 0;
  for (int r = 0; r + patch_side <= rows; r += stride) {
    for (int c = 0; c + patch_side <= cols; c += stride) {
      const Eigen::VectorXd& v = patches[idx++];
      if (v.size() != patch_side * patch_side) {
        throw std::invalid_argument("assemble_patches: bad patch length");
      }
      for (int i = 0; i < patch_side; ++i) {
        for (int j = 0; j < patch_side; ++j) {
          sum(r + i, c + j) += v(i * patch_side + j);
          count(r + i, c + j) += 1.0;
        }
      }
    }
  }
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (count(i, j) > 0.0) sum(i, j) /= count(i, j);
    }
  }
  return sum;
}

}  // namespace vstcs::signals
