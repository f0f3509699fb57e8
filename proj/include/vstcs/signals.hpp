#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace vstcs::signals {

// Orthonormal synthesis basis; columns are basis vectors, x = matrix * theta.
struct OrthoBasis {
  enum class Kind { identity, dct1d, dct2d };
  Kind kind = Kind::identity;
  int dim = 0;
  int patch_side = 0;  // set for dct2d only (dim = patch_side^2)
  Eigen::MatrixXd matrix;
};

OrthoBasis make_identity_basis(int m);

// Orthonormal DCT-II; first column is the constant vector 1/sqrt(m).
OrthoBasis make_dct_basis(int m);

// 2D DCT on patch_side x patch_side patches (Kronecker product of two 1D
// DCTs), acting on row-major vectorized patches.
OrthoBasis make_dct2d_basis(int patch_side);

struct SparseSignal {
  Eigen::VectorXd x;      // non-negative signal, ||x||_1 = intensity
  Eigen::VectorXd theta;  // coefficients, x = Psi theta
  std::vector<int> support;
  int s = 0;              // sparsity of the generating draw (excl. DC)
  double intensity = 0;
};

// Draws s non-DC coefficients from Unif[0,1] on a random support, sets the
// DC coefficient to the smallest value making min(x) = 0, then scales to the
// requested l1 intensity. Effective l0 is at most s + 1.
SparseSignal generate_sparse_signal(int m, int s, double intensity,
                                    const OrthoBasis& basis,
                                    std::uint64_t seed);

// Dense Unif[0,1] signal scaled to the requested l1 intensity; the signal
// model of the residual-statistics experiments.
Eigen::VectorXd uniform_signal(int m, double intensity, std::uint64_t seed);

// Number of entries with |theta_i| > tol * max|theta|.
int effective_l0(const Eigen::VectorXd& theta, double tol = 1e-12);

// Row-major list of vectorized patch_side x patch_side patches starting at
// multiples of stride; positions that would overrun the border are dropped.
std::vector<Eigen::VectorXd> extract_patches(const Eigen::MatrixXd& image,
                                             int patch_side, int stride);

// Inverse of extract_patches up to averaging: every pixel becomes the mean
// of all patch copies covering it (pixels covered by none stay 0).
Eigen::MatrixXd assemble_patches(const std::vector<Eigen::VectorXd>& patches,
                                 int rows, int cols, int patch_side,
                                 int stride);

}  // namespace vstcs::signals
