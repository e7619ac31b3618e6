#pragma once

#include <span>
#include <vector>

#include "msgpca/eigen_state.hpp"

namespace msgpca {

// Eigenvalue-level input of the shift search: distinct eigenvalues with their
// multiplicities in a d-dimensional space. When the multiplicities sum to
// less than `dim` the rest is an implicit zero eigenvalue.
struct SpectrumView {
  std::span<const double> eigvals;
  std::span<const Index> mults;
  Index dim = 0;
  double target_trace = 1.0;
};

// Finds S such that sum_i mults[i] * clamp(eigvals[i] + S, 0, 1) equals the
// target trace, by a two-pointer scan over (zero-clip, one-clip) thresholds
// of the sorted spectrum. O(n log n). Throws Infeasible when no threshold
// pair works, which only happens for inconsistent input such as k > d.
double find_shift(const SpectrumView& view);

// clamp(value + shift, 0, 1) applied elementwise.
std::vector<double> apply_shift(std::span<const double> eigvals, double shift);

// Frobenius projection onto {0 <= M <= I, tr M = k}. The eigenvectors are
// kept; directions whose eigenvalue clips to zero are dropped.
EigenState project_capped_simplex(const EigenState& state, Index k);

// Frobenius projection onto {0 <= M <= I, tr M = k, rank M <= K}. Every
// support made of the L largest eigenvalues (k <= L <= K) is projected with
// find_shift and the closest candidate wins; ties go to the smaller support.
// Complement directions are materialized when a support needs them. For
// K >= d this is project_capped_simplex.
EigenState project_capped_rank(const EigenState& state, Index k, Index rank_cap);

// KL (von Neumann entropy) projection onto {0 < M <= I, tr M = k}:
// eigenvalues are rescaled by a common factor and capped at one, repeating
// until no new eigenvalue caps. Zero eigenvalues stay zero.
EigenState project_entropic(const EigenState& state, Index k);

// The same projection for a state that stores log-eigenvalues: every entry
// of `log_state` is log(sigma). Returns the log of the projected spectrum.
EigenState project_entropic_log(const EigenState& log_state, Index k);

// Log-domain cap-and-rescale on grouped values. Returns the new log values.
std::vector<double> entropic_log_projection(std::span<const double> log_values,
                                            std::span<const Index> mults, double target_trace);

}  // namespace msgpca
