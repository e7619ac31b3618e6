#include "msgpca/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msgpca/dense_eig.hpp"
#include "msgpca/error.hpp"

namespace msgpca {
namespace {

constexpr double kFeasibilitySlack = 1e-9;
constexpr double kTraceSlack = 1e-6;

SubspaceMixture peel(const Eigen::MatrixXd& directions, Eigen::VectorXd weights, Index k) {
  const Index d = directions.rows();
  const Index n = directions.cols();
  if (k < 1 || k > d) throw Infeasible("rounding: k must lie in [1, d]");
  for (Index i = 0; i < n; ++i) {
    if (weights[i] < -kFeasibilitySlack || weights[i] > 1.0 + kFeasibilitySlack) {
      throw Infeasible("rounding: eigenvalue " + std::to_string(weights[i]) + " outside [0, 1]");
    }
    weights[i] = std::clamp(weights[i], 0.0, 1.0);
  }
  if (std::abs(weights.sum() - static_cast<double>(k)) > kTraceSlack) {
    throw Infeasible("rounding: trace " + std::to_string(weights.sum()) + " differs from k = " +
                     std::to_string(k));
  }
  if (n < k) throw Infeasible("rounding: fewer eigen-directions than k");

  SubspaceMixture out;
  out.dim = d;
  out.k = k;
  // Invariant: 0 <= p_i <= remaining and sum p = k * remaining.
  Eigen::VectorXd p = weights;
  double remaining = 1.0;
  constexpr double tol = 1e-12;
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index round = 0; round <= 2 * n + 1 && remaining > tol; ++round) {
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return p[a] > p[b]; });

    // The k largest always include every tight entry (p_i == remaining).
    double weight = remaining;
    for (Index c = 0; c < k; ++c) weight = std::min(weight, p[order[c]]);
    if (n > k) weight = std::min(weight, remaining - p[order[k]]);
    const bool last = weight <= tol || remaining - weight <= tol;
    if (last) weight = remaining;

    MixtureComponent component;
    component.weight = weight;
    component.basis.resize(d, k);
    for (Index c = 0; c < k; ++c) {
      component.basis.col(c) = directions.col(order[c]);
      p[order[c]] = std::max(0.0, p[order[c]] - weight);
    }
    out.components.push_back(std::move(component));
    remaining -= weight;
    if (last) break;
  }
  return out;
}

}  // namespace

double SubspaceMixture::total_weight() const {
  double total = 0.0;
  for (const auto& c : components) total += c.weight;
  return total;
}

Eigen::MatrixXd SubspaceMixture::reconstruct() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& c : components) out.noalias() += c.weight * c.basis * c.basis.transpose();
  return out;
}

std::size_t SubspaceMixture::sample(std::mt19937_64& rng) const {
  if (components.empty()) throw Infeasible("SubspaceMixture::sample: empty mixture");
  std::uniform_real_distribution<double> uniform(0.0, total_weight());
  double u = uniform(rng);
  for (std::size_t i = 0; i < components.size(); ++i) {
    u -= components[i].weight;
    if (u < 0.0) return i;
  }
  return components.size() - 1;
}

SubspaceMixture decompose(const EigenState& state, Index k) {
  const Index d = state.dim();
  const Index m = state.columns();
  Index directions_count = m;
  if (std::abs(state.complement()) > kFeasibilitySlack) directions_count = d;
  Eigen::MatrixXd directions(d, directions_count);
  Eigen::VectorXd weights(directions_count);
  directions.leftCols(m) = state.basis();
  weights.head(m) = state.values();
  if (directions_count > m) {
    directions.rightCols(d - m) = complete_basis(state.basis(), d - m);
    weights.tail(d - m).setConstant(state.complement());
  } else if (state.complement() < -kFeasibilitySlack) {
    throw Infeasible("rounding: negative complement eigenvalue");
  }
  return peel(directions, std::move(weights), k);
}

SubspaceMixture decompose(const Eigen::MatrixXd& matrix, Index k) {
  const Eigen::MatrixXd symmetric = 0.5 * (matrix + matrix.transpose());
  SymmetricEigen eig = dense_eigensymm(symmetric);
  return peel(eig.vectors, std::move(eig.values), k);
}

Rounding round_to_rank_k(const EigenState& state, Index k, std::mt19937_64& rng) {
  Rounding out{decompose(state, k), {}};
  out.sample = out.mixture.components[out.mixture.sample(rng)].basis;
  return out;
}

Rounding round_to_rank_k(const Eigen::MatrixXd& matrix, Index k, std::mt19937_64& rng) {
  Rounding out{decompose(matrix, k), {}};
  out.sample = out.mixture.components[out.mixture.sample(rng)].basis;
  return out;
}

}  // namespace msgpca
