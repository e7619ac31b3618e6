#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace msgpca {

using Index = Eigen::Index;

// A single observation from the stream.
using Sample = Eigen::VectorXd;

// Eigenvalues closer than this are treated as one distinct value.
inline constexpr double kMergeTolerance = 1e-9;

// Maximum permitted deviation of U^T U from the identity.
inline constexpr double kOrthonormalityTolerance = 1e-8;

// The basis is re-orthonormalized after this many rank-1 updates.
inline constexpr std::uint32_t kReorthonormalizeInterval = 512;

// Distinct eigenvalues (descending) with their multiplicities.
struct Spectrum {
  std::vector<double> values;
  std::vector<Index> mults;

  Index total_multiplicity() const;
};

// Compact spectral representation of a symmetric d x d matrix
//
//   M = U diag(values) U^T + complement * (I - U U^T)
//
// where U is d x m with orthonormal columns. Every column of U carries its
// own eigenvalue; `values` is kept in descending order. The orthogonal
// complement of span(U) has multiplicity d - m and a single shared
// eigenvalue, which is zero for every low-rank iterate.
class EigenState {
 public:
  enum class Check { kFull, kNone };

  // M = complement * I.
  explicit EigenState(Index dim, double complement = 0.0);

  // Takes ownership of an explicit eigendecomposition. With Check::kFull the
  // shapes, finiteness and orthonormality are validated and `values` is
  // sorted descending (columns permuted to match).
  EigenState(Eigen::MatrixXd basis, Eigen::VectorXd values,
             double complement = 0.0, Check check = Check::kFull);

  Index dim() const { return basis_.rows(); }
  Index columns() const { return basis_.cols(); }
  Index complement_multiplicity() const { return dim() - columns(); }

  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::VectorXd& values() const { return values_; }
  double complement() const { return complement_; }

  // Number of nonzero eigenvalues counted with multiplicity.
  Index rank() const;
  double trace() const;

  // Distinct eigenvalues and multiplicities over all d directions,
  // including the complement when it has positive multiplicity. Neighbouring
  // values within `merge_tolerance` collapse into one group whose value is
  // their mean. When requested, `column_group[j]` receives the group of basis
  // column j and `complement_group` the group of the complement (or -1).
  Spectrum distinct(double merge_tolerance = kMergeTolerance,
                    std::vector<Index>* column_group = nullptr,
                    Index* complement_group = nullptr) const;

  // All d eigenvalues, descending.
  Eigen::VectorXd expanded_values() const;

  // max |U^T U - I|.
  double orthonormality_error() const;

  std::uint32_t updates_since_reorthonormalization() const {
    return updates_since_reorth_;
  }

  // Returns a copy with the update counter replaced; used by kernels that
  // build a new state from an old one.
  EigenState with_update_count(std::uint32_t count) const;

 private:
  Eigen::MatrixXd basis_;
  Eigen::VectorXd values_;
  double complement_ = 0.0;
  std::uint32_t updates_since_reorth_ = 0;
};

// M + eta * x x^T, exact up to round-off. The rank grows by at most one. The
// result is not projected: eigenvalues may leave [0, 1].
EigenState rank1_update(const EigenState& state, const Eigen::Ref<const Eigen::VectorXd>& x,
                        double eta);

// Dense d x d matrix represented by `state`. For tests and small d only.
Eigen::MatrixXd reconstruct(const EigenState& state);

// Restores orthonormality of the basis with a QR factorization followed by a
// small eigen-solve, so the represented matrix is unchanged.
EigenState reorthonormalize(const EigenState& state);

// Keeps the columns whose index is listed, with the given new values, and
// sets a new complement eigenvalue. The caller guarantees that the kept
// columns are a subset of the original basis.
EigenState select_columns(const EigenState& state, const std::vector<Index>& keep,
                          const Eigen::VectorXd& new_values, double complement);

// `count` orthonormal vectors orthogonal to the columns of `basis`, chosen
// deterministically from the standard basis.
Eigen::MatrixXd complete_basis(const Eigen::MatrixXd& basis, Index count);

// First `count` eigen-directions (by descending eigenvalue) of `state`,
// padded with complement directions when the basis is too small.
Eigen::MatrixXd top_directions(const EigenState& state, Index count);

}  // namespace msgpca
