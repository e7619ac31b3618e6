#include "msgpca/eigen_state.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msgpca/dense_eig.hpp"
#include "msgpca/error.hpp"

namespace msgpca {

Index Spectrum::total_multiplicity() const {
  return std::accumulate(mults.begin(), mults.end(), Index{0});
}

EigenState::EigenState(Index dim, double complement)
    : basis_(dim, 0), values_(0), complement_(complement) {
  if (dim <= 0) throw DimensionMismatch("EigenState: dimension must be positive");
  if (!std::isfinite(complement)) throw NonFiniteInput("EigenState: non-finite complement");
}

EigenState::EigenState(Eigen::MatrixXd basis, Eigen::VectorXd values, double complement,
                       Check check)
    : basis_(std::move(basis)), values_(std::move(values)), complement_(complement) {
  if (check == Check::kNone) return;
  if (basis_.rows() <= 0) throw DimensionMismatch("EigenState: dimension must be positive");
  if (basis_.cols() != values_.size()) {
    throw DimensionMismatch("EigenState: " + std::to_string(basis_.cols()) + " basis columns but " +
                            std::to_string(values_.size()) + " eigenvalues");
  }
  if (basis_.cols() > basis_.rows()) {
    throw DimensionMismatch("EigenState: more basis columns than dimensions");
  }
  if (!basis_.allFinite() || !values_.allFinite() || !std::isfinite(complement_)) {
    throw NonFiniteInput("EigenState: non-finite entry");
  }
  if (orthonormality_error() > kOrthonormalityTolerance) {
    throw Error("EigenState: basis columns are not orthonormal");
  }
  std::vector<Index> order(static_cast<std::size_t>(values_.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values_[a] > values_[b]; });
  if (!std::is_sorted(order.begin(), order.end())) {
    Eigen::MatrixXd sorted_basis(basis_.rows(), basis_.cols());
    Eigen::VectorXd sorted_values(values_.size());
    for (Index j = 0; j < values_.size(); ++j) {
      sorted_basis.col(j) = basis_.col(order[j]);
      sorted_values[j] = values_[order[j]];
    }
    basis_ = std::move(sorted_basis);
    values_ = std::move(sorted_values);
  }
}

Index EigenState::rank() const {
  Index r = 0;
  for (Index j = 0; j < values_.size(); ++j) r += values_[j] != 0.0 ? 1 : 0;
  if (complement_ != 0.0) r += complement_multiplicity();
  return r;
}

double EigenState::trace() const {
  return values_.sum() + complement_ * static_cast<double>(complement_multiplicity());
}

Spectrum EigenState::distinct(double merge_tolerance, std::vector<Index>* column_group,
                              Index* complement_group) const {
  // Entry index m stands for the complement.
  const Index m = columns();
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(m) + 1);
  for (Index j = 0; j < m; ++j) order.push_back(j);
  if (complement_multiplicity() > 0) order.push_back(m);
  auto value_of = [&](Index e) { return e == m ? complement_ : values_[e]; };
  auto mult_of = [&](Index e) { return e == m ? complement_multiplicity() : Index{1}; };
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return value_of(a) > value_of(b); });

  if (column_group != nullptr) column_group->assign(static_cast<std::size_t>(m), -1);
  if (complement_group != nullptr) *complement_group = -1;

  Spectrum out;
  double weighted_sum = 0.0;
  double previous = 0.0;
  for (Index e : order) {
    const double value = value_of(e);
    const Index mult = mult_of(e);
    if (!out.values.empty() && previous - value <= merge_tolerance) {
      weighted_sum += value * static_cast<double>(mult);
      out.mults.back() += mult;
      out.values.back() = weighted_sum / static_cast<double>(out.mults.back());
    } else {
      out.values.push_back(value);
      out.mults.push_back(mult);
      weighted_sum = value * static_cast<double>(mult);
    }
    previous = value;
    const Index group = static_cast<Index>(out.values.size()) - 1;
    if (e == m) {
      if (complement_group != nullptr) *complement_group = group;
    } else if (column_group != nullptr) {
      (*column_group)[static_cast<std::size_t>(e)] = group;
    }
  }
  return out;
}

Eigen::VectorXd EigenState::expanded_values() const {
  Eigen::VectorXd all(dim());
  all.head(columns()) = values_;
  all.tail(complement_multiplicity()).setConstant(complement_);
  std::sort(all.data(), all.data() + all.size(), std::greater<>());
  return all;
}

double EigenState::orthonormality_error() const {
  if (columns() == 0) return 0.0;
  const Eigen::MatrixXd gram = basis_.transpose() * basis_;
  return (gram - Eigen::MatrixXd::Identity(columns(), columns())).cwiseAbs().maxCoeff();
}

EigenState EigenState::with_update_count(std::uint32_t count) const {
  EigenState copy = *this;
  copy.updates_since_reorth_ = count;
  return copy;
}

EigenState rank1_update(const EigenState& state, const Eigen::Ref<const Eigen::VectorXd>& x,
                        double eta) {
  if (x.size() != state.dim()) {
    throw DimensionMismatch("rank1_update: sample has dimension " + std::to_string(x.size()) +
                            ", state has " + std::to_string(state.dim()));
  }
  if (!x.allFinite()) throw NonFiniteInput("rank1_update: non-finite sample");
  if (!std::isfinite(eta) || eta < 0.0) {
    throw NonFiniteInput("rank1_update: step size must be finite and nonnegative");
  }

  const Eigen::MatrixXd& u = state.basis();
  const Index m = state.columns();
  const Eigen::VectorXd scaled = std::sqrt(eta) * x;
  const double scaled_norm = scaled.norm();
  if (scaled_norm == 0.0) return state;

  // Split into the in-span coordinates and the residual; the second
  // Gram-Schmidt pass keeps the new direction orthogonal to working precision.
  Eigen::VectorXd in_span = u.transpose() * scaled;
  Eigen::VectorXd residual = scaled - u * in_span;
  if (m > 0) {
    const Eigen::VectorXd correction = u.transpose() * residual;
    in_span += correction;
    residual.noalias() -= u * correction;
  }
  const double r = residual.norm();
  const bool grows = m < state.dim() && r > 1e-10 * scaled_norm;

  Eigen::MatrixXd new_basis;
  Eigen::VectorXd new_values;
  if (grows) {
    Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(m + 1, m + 1);
    bordered.diagonal().head(m) = state.values();
    bordered(m, m) = state.complement();
    Eigen::VectorXd z(m + 1);
    z.head(m) = in_span;
    z[m] = r;
    bordered.noalias() += z * z.transpose();
    SymmetricEigen eig = dense_eigensymm(bordered);
    new_basis.noalias() = u * eig.vectors.topRows(m);
    new_basis.noalias() += (residual / r) * eig.vectors.row(m);
    new_values = std::move(eig.values);
  } else {
    Eigen::MatrixXd inner = in_span * in_span.transpose();
    inner.diagonal() += state.values();
    SymmetricEigen eig = dense_eigensymm(inner);
    new_basis.noalias() = u * eig.vectors;
    new_values = std::move(eig.values);
  }

  EigenState out(std::move(new_basis), std::move(new_values), state.complement(),
                 EigenState::Check::kNone);
  const std::uint32_t count = state.updates_since_reorthonormalization() + 1;
  if (count >= kReorthonormalizeInterval) return reorthonormalize(out);
  return out.with_update_count(count);
}

Eigen::MatrixXd reconstruct(const EigenState& state) {
  const Index d = state.dim();
  const Eigen::MatrixXd& u = state.basis();
  Eigen::MatrixXd out = state.complement() * Eigen::MatrixXd::Identity(d, d);
  if (state.columns() > 0) {
    const Eigen::VectorXd shifted = state.values().array() - state.complement();
    out.noalias() += u * shifted.asDiagonal() * u.transpose();
  }
  return out;
}

EigenState reorthonormalize(const EigenState& state) {
  const Index m = state.columns();
  if (m == 0) return state.with_update_count(0);
  const Index d = state.dim();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(state.basis());
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, m);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  // U diag(v) U^T + f (I - U U^T) = Q (R diag(v - f) R^T + f I) Q^T + f (I - Q Q^T)
  const double f = state.complement();
  Eigen::MatrixXd inner = r * (state.values().array() - f).matrix().asDiagonal() * r.transpose();
  inner = 0.5 * (inner + inner.transpose()).eval();
  inner.diagonal().array() += f;
  SymmetricEigen eig = dense_eigensymm(inner);
  return EigenState(q * eig.vectors, std::move(eig.values), f, EigenState::Check::kNone);
}

EigenState select_columns(const EigenState& state, const std::vector<Index>& keep,
                          const Eigen::VectorXd& new_values, double complement) {
  Eigen::MatrixXd basis(state.dim(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    basis.col(static_cast<Index>(j)) = state.basis().col(keep[j]);
  }
  EigenState out(std::move(basis), new_values, complement, EigenState::Check::kNone);
  return out.with_update_count(state.updates_since_reorthonormalization());
}

Eigen::MatrixXd complete_basis(const Eigen::MatrixXd& basis, Index count) {
  const Index d = basis.rows();
  const Index m = basis.cols();
  if (count < 0 || m + count > d) {
    throw DimensionMismatch("complete_basis: cannot add " + std::to_string(count) +
                            " directions to a " + std::to_string(m) + "-column basis in R^" +
                            std::to_string(d));
  }
  Eigen::MatrixXd out(d, count);
  if (count == 0) return out;

  // Standard basis vectors with the largest residual against span(basis)
  // are tried first.
  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  const Eigen::VectorXd captured =
      m > 0 ? Eigen::VectorXd(basis.rowwise().squaredNorm()) : Eigen::VectorXd::Zero(d);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return captured[a] < captured[b]; });

  Index filled = 0;
  for (const double accept : {0.5, 1e-6}) {
    for (Index i : order) {
      if (filled == count) break;
      Eigen::VectorXd v = Eigen::VectorXd::Unit(d, i);
      for (int pass = 0; pass < 2; ++pass) {
        if (m > 0) v -= basis * (basis.transpose() * v);
        if (filled > 0) v -= out.leftCols(filled) * (out.leftCols(filled).transpose() * v);
      }
      const double norm = v.norm();
      if (norm > accept) out.col(filled++) = v / norm;
    }
  }
  if (filled < count) throw ConvergenceFailure("complete_basis: could not complete the basis");
  return out;
}

Eigen::MatrixXd top_directions(const EigenState& state, Index count) {
  const Index d = state.dim();
  if (count < 0 || count > d) {
    throw DimensionMismatch("top_directions: requested " + std::to_string(count) +
                            " directions in R^" + std::to_string(d));
  }
  const Index m = state.columns();
  const Eigen::VectorXd& values = state.values();
  Eigen::MatrixXd out(d, count);
  Index filled = 0;
  Index next = 0;
  // Explicit directions at or above the complement eigenvalue come first.
  while (filled < count && next < m && values[next] >= state.complement()) {
    out.col(filled++) = state.basis().col(next++);
  }
  if (filled < count && m < d) {
    const Index pad = std::min(count - filled, d - m);
    out.middleCols(filled, pad) = complete_basis(state.basis(), pad);
    filled += pad;
  }
  while (filled < count) out.col(filled++) = state.basis().col(next++);
  return out;
}

}  // namespace msgpca
