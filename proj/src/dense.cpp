#include "romsieve/dense.hpp"

#include <Eigen/Eigenvalues>

#include "romsieve/errors.hpp"

namespace romsieve {

ThinSvd thin_svd(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) {
    throw invalid_input_error("thin_svd: non-finite entries");
  }
  // BDCSVD degrades for tiny matrices; Jacobi is exact enough everywhere we
  // care and the crossover keeps large snapshot PODs fast.
  ThinSvd out;
  if (m.rows() < 32 || m.cols() < 32) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.sigma = svd.singularValues();
    out.vt = svd.matrixV().transpose();
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.sigma = svd.singularValues();
    out.vt = svd.matrixV().transpose();
  }
  return out;
}

Cpqr cpqr(const Eigen::MatrixXd& m) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::Index k = m.cols();
  const Eigen::Index rows = std::min(m.rows(), k);  // R is a rows x k trapezoid
  Cpqr out;
  out.q = Eigen::MatrixXd::Zero(m.rows(), k);
  out.q.leftCols(rows) = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), rows);
  out.r = Eigen::MatrixXd::Zero(k, k);
  out.r.topRows(rows) =
      qr.matrixR().topRows(rows).template triangularView<Eigen::Upper>().toDenseMatrix();
  out.perm.resize(k);
  const auto& indices = qr.colsPermutation().indices();
  for (Eigen::Index j = 0; j < k; ++j) {
    out.perm[j] = indices(j);
  }
  return out;
}

Eigen::MatrixXd factor_spsd(const Eigen::MatrixXd& m, const DenseTolerances& tol) {
  if (m.rows() != m.cols()) {
    throw invalid_input_error("factor_spsd: matrix not square");
  }
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > tol.spsd_symmetry * scale) {
    throw invalid_input_error("factor_spsd: matrix not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double floor = -tol.spsd_eigenvalue * std::max(scale, 1e-300);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < floor) {
      throw not_psd_error("factor_spsd: eigenvalue " + std::to_string(lambda(i)) +
                          " below PSD tolerance");
    }
    lambda(i) = std::max(lambda(i), 0.0);
  }
  // Z = Lambda^{1/2} Q^T so that Z^T Z = Q Lambda Q^T = M.
  return lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd solve_dense(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            bool transpose, const DenseTolerances& tol) {
  if (a.rows() != a.cols()) {
    throw invalid_input_error("solve_dense: matrix not square");
  }
  if (a.rows() != b.rows()) {
    throw invalid_input_error("solve_dense: dimension mismatch");
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(transpose ? a.transpose() : a);
  const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double largest = pivots.size() ? pivots.maxCoeff() : 0.0;
  if (largest == 0.0 || pivots.minCoeff() < tol.solve_pivot * largest) {
    throw singular_system_error("solve_dense: numerically singular system");
  }
  return lu.solve(b);
}

}  // namespace romsieve
