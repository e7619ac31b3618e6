#include "msgpca/dense_eig.hpp"

#include <algorithm>
#include <string>

#include <Eigen/Eigenvalues>

#include "msgpca/error.hpp"

namespace msgpca {

SymmetricEigen dense_eigensymm(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("dense_eigensymm: matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  const Eigen::Index n = a.rows();
  SymmetricEigen out;
  if (n == 0) {
    out.values.resize(0);
    out.vectors.resize(0, 0);
    return out;
  }
  if (!a.allFinite()) throw NonFiniteInput("dense_eigensymm: non-finite entry");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw NotSymmetric("dense_eigensymm: input is not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("dense_eigensymm: QR iteration did not converge (n=" +
                             std::to_string(n) + ")");
  }
  // Eigen returns ascending order.
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace msgpca
