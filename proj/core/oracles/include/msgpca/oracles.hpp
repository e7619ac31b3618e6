#pragma once

// Slow, independent reference implementations used by the tests, the
// acceptance suite and `msgpca selftest`. None of them share code with the
// production kernels.

#include <utility>

#include <Eigen/Dense>

#include "msgpca/dense_eig.hpp"

namespace msgpca::oracle {

// Cyclic Jacobi rotations until the off-diagonal mass is below `tol`.
// Eigenvalues descending.
SymmetricEigen jacobi_eigensymm(const Eigen::MatrixXd& a, double tol = 1e-14,
                                int max_sweeps = 100);

// Eigenvalues of [[a, b], [b, c]] from the characteristic polynomial,
// descending.
std::pair<double, double> eigenvalues_2x2(double a, double b, double c);

// Projection of a full eigenvalue list onto {0 <= s <= 1, sum s = k}.
// Enumerates every (count clipped to one, count clipped to zero) pair of the
// sorted list and returns the unique KKT-consistent candidate. Entries are
// returned in the input order.
Eigen::VectorXd capped_simplex(const Eigen::VectorXd& values, double k);

// The same via bisection on the shift of sum clamp(s + S, 0, 1) = k.
Eigen::VectorXd capped_simplex_bisection(const Eigen::VectorXd& values, double k);

// Projection onto {0 <= s <= 1, sum s = k, at most K nonzeros} by trying
// every support of size k..K. Exponential; n <= 12 or so.
Eigen::VectorXd capped_rank(const Eigen::VectorXd& values, Eigen::Index k, Eigen::Index rank_cap);

// Relative-entropy projection onto {0 <= s <= 1, sum s = k}: s * c capped at
// one with c found by bisection.
Eigen::VectorXd entropic(const Eigen::VectorXd& values, double k);

}  // namespace msgpca::oracle
