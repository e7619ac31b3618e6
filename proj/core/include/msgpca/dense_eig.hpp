#pragma once

#include <Eigen/Dense>

namespace msgpca {

struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns matching `values`
};

// Full eigendecomposition of a small dense symmetric matrix.
//
// Throws NotSymmetric when max|A - A^T| exceeds 1e-10 * max(1, max|A|),
// NonFiniteInput on NaN/Inf entries and ConvergenceFailure when the
// iteration cap is hit.
SymmetricEigen dense_eigensymm(const Eigen::Ref<const Eigen::MatrixXd>& a);

}  // namespace msgpca
