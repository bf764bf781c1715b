#pragma once

#include <Eigen/Dense>

#include "stitch3d/common.hpp"

namespace stitch3d {

struct CmdsResult {
  Eigen::Matrix3Xd coords;        // one column per input point
  Eigen::VectorXd eigenvalues;    // full spectrum, descending
  bool negative_spectrum = false; // 4th eigenvalue materially positive
};

/// Classical multidimensional scaling: double-center -1/2 * J D.^2 J and
/// read coordinates off the top eigenpairs (clamped at zero). The input must
/// be a complete symmetric distance matrix with zero diagonal.
inline CmdsResult cmds(const Eigen::MatrixXd& D, int dim = 3) {
  const int n = static_cast<int>(D.rows());
  if (D.cols() != n || n < 1)
    throw std::invalid_argument("cmds needs a square distance matrix");
  for (int i = 0; i < n; ++i) {
    if (D(i, i) != 0.0)
      throw std::invalid_argument("cmds distance matrix must have zero diagonal");
    for (int j = i + 1; j < n; ++j)
      if (std::abs(D(i, j) - D(j, i)) > 1e-12 * std::max(1.0, std::abs(D(i, j))))
        throw std::invalid_argument("cmds distance matrix must be symmetric");
  }
  const Eigen::MatrixXd D2 = D.array().square();
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n) -
                      Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  Eigen::MatrixXd B = -0.5 * J * D2 * J;
  B = 0.5 * (B + B.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
  if (eig.info() != Eigen::Success)
    throw SolverFailure("cmds eigendecomposition failed");

  CmdsResult out;
  out.eigenvalues = eig.eigenvalues().reverse();
  out.coords = Eigen::Matrix3Xd::Zero(dim, n);
  const double floor = 1e-12 * std::max(0.0, out.eigenvalues(0));
  for (int k = 0; k < dim && k < n; ++k) {
    const double lambda =
        out.eigenvalues(k) > floor ? out.eigenvalues(k) : 0.0;
    out.coords.row(k) =
        std::sqrt(lambda) * eig.eigenvectors().col(n - 1 - k).transpose();
  }
  if (n > dim && out.eigenvalues(dim) > 1e-6 * std::max(0.0, out.eigenvalues(0)))
    out.negative_spectrum = true;  // non-Euclidean input, rank > dim
  return out;
}

}  // namespace stitch3d
