#pragma once

#include <Eigen/Dense>

namespace romsieve {

// Default tolerances for the dense kernels. Overridable per call; tests pin
// the defaults.
struct DenseTolerances {
  double svd_reconstruct = 1e-12;
  double spsd_symmetry = 1e-10;
  double spsd_eigenvalue = 1e-10;   // relative floor for "numerically PSD"
  double solve_pivot = 1e-14;       // scaled zero-pivot threshold
};

struct ThinSvd {
  Eigen::MatrixXd u;       // m x r
  Eigen::VectorXd sigma;   // r, descending, nonnegative
  Eigen::MatrixXd vt;      // r x k
};

struct Cpqr {
  Eigen::MatrixXd q;          // m x k, orthonormal columns
  Eigen::MatrixXd r;          // k x k, upper triangular, |r(i,i)| nonincreasing
  std::vector<int> perm;      // column j of q*r reconstructs column perm[j] of the input
};

/// Thin SVD, r = min(m, k). Throws invalid_input_error on non-finite entries.
ThinSvd thin_svd(const Eigen::MatrixXd& m);

/// Column-pivoted QR. Rank deficiency is fine; diagonal magnitudes of R come
/// out nonincreasing.
Cpqr cpqr(const Eigen::MatrixXd& m);

/// Symmetric factorization Z^T Z = M for numerically PSD M, via symmetric
/// eigendecomposition with negative eigenvalues clamped to zero. Cholesky is
/// deliberately not used: the sieved-basis metric is routinely semi-definite.
/// Throws not_psd_error if an eigenvalue falls below -tol.spsd_eigenvalue*||M||.
Eigen::MatrixXd factor_spsd(const Eigen::MatrixXd& m, const DenseTolerances& tol = {});

/// Solve A X = B (or A^T X = B). Throws singular_system_error when a pivot is
/// zero to within tol.solve_pivot relative to the largest pivot.
Eigen::MatrixXd solve_dense(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            bool transpose = false, const DenseTolerances& tol = {});

}  // namespace romsieve
