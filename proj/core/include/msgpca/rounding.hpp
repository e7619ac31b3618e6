#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "msgpca/eigen_state.hpp"

namespace msgpca {

struct MixtureComponent {
  double weight = 0.0;
  Eigen::MatrixXd basis;  // d x k, orthonormal columns
};

// Convex combination of rank-k projectors.
struct SubspaceMixture {
  Index dim = 0;
  Index k = 0;
  std::vector<MixtureComponent> components;

  double total_weight() const;
  // sum_c weight_c * B_c B_c^T
  Eigen::MatrixXd reconstruct() const;
  // Index of a component drawn with probability equal to its weight.
  std::size_t sample(std::mt19937_64& rng) const;
};

struct Rounding {
  SubspaceMixture mixture;
  Eigen::MatrixXd sample;  // basis of the drawn component
};

// Decomposes a feasible M (0 <= M <= I, tr M = k) into at most d weighted
// rank-k projectors by greedy peeling over its eigenvalues: each round takes
// every eigenvalue that equals the remaining weight plus the largest others,
// and removes the largest coefficient that keeps the remainder feasible.
// Throws Infeasible when M is not (numerically) feasible.
SubspaceMixture decompose(const EigenState& state, Index k);
SubspaceMixture decompose(const Eigen::MatrixXd& matrix, Index k);

// decompose() followed by drawing one component with `rng`.
Rounding round_to_rank_k(const EigenState& state, Index k, std::mt19937_64& rng);
Rounding round_to_rank_k(const Eigen::MatrixXd& matrix, Index k, std::mt19937_64& rng);

}  // namespace msgpca
