#include "msgpca/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "msgpca/error.hpp"

namespace msgpca {
namespace {

// Projected eigenvalues at or below this are treated as exact zeros.
constexpr double kDropTolerance = 1e-12;

double clamp01(double v) { return std::max(0.0, std::min(1.0, v)); }

void check_target(Index k, Index dim, const char* who) {
  if (k < 1 || k > dim) {
    throw Infeasible(std::string(who) + ": target rank " + std::to_string(k) +
                     " must lie in [1, " + std::to_string(dim) + "]");
  }
}

}  // namespace

double find_shift(const SpectrumView& view) {
  if (view.eigvals.size() != view.mults.size()) {
    throw DimensionMismatch("find_shift: eigenvalue and multiplicity lists differ in length");
  }
  if (view.dim <= 0) throw DimensionMismatch("find_shift: dimension must be positive");
  const double k = view.target_trace;
  if (!(k > 0.0) || k > static_cast<double>(view.dim)) {
    throw Infeasible("find_shift: target trace " + std::to_string(k) + " outside (0, " +
                     std::to_string(view.dim) + "]");
  }

  // Ascending (value, multiplicity), padded with the implicit zero eigenvalue.
  std::vector<std::pair<double, Index>> spectrum;
  spectrum.reserve(view.eigvals.size() + 1);
  Index explicit_mult = 0;
  for (std::size_t i = 0; i < view.eigvals.size(); ++i) {
    if (!std::isfinite(view.eigvals[i])) throw NonFiniteInput("find_shift: non-finite eigenvalue");
    if (view.mults[i] <= 0) throw DimensionMismatch("find_shift: multiplicities must be positive");
    spectrum.emplace_back(view.eigvals[i], view.mults[i]);
    explicit_mult += view.mults[i];
  }
  if (explicit_mult > view.dim) {
    throw DimensionMismatch("find_shift: multiplicities sum to " + std::to_string(explicit_mult) +
                            " > d = " + std::to_string(view.dim));
  }
  if (explicit_mult < view.dim) spectrum.emplace_back(0.0, view.dim - explicit_mult);
  std::sort(spectrum.begin(), spectrum.end());

  const auto n = static_cast<Index>(spectrum.size());
  const double d = static_cast<double>(view.dim);
  double scale = 1.0;
  for (const auto& [value, mult] : spectrum) scale = std::max(scale, std::abs(value));
  const double tol = 1e-12 * scale;
  auto value = [&](Index i) { return spectrum[static_cast<std::size_t>(i)].first; };
  auto mult = [&](Index i) {
    return static_cast<double>(spectrum[static_cast<std::size_t>(i)].second);
  };

  // Entries [0, i) clip to 0, [i, j) are interior, [j, n) clip to 1.
  Index i = 0;
  Index j = 0;
  double sum_i = 0.0, sum_j = 0.0, count_i = 0.0, count_j = 0.0;
  for (Index guard = 0; i < n && guard <= 2 * n; ++guard) {
    if (i < j) {
      const double shift = (k - (sum_j - sum_i) - (d - count_j)) / (count_j - count_i);
      const bool feasible = value(i) + shift >= -tol && value(j - 1) + shift <= 1.0 + tol &&
                            (i == 0 || value(i - 1) + shift <= tol) &&
                            (j == n || value(j) + shift >= 1.0 - tol);
      if (feasible) {
        // Recompute from the interior block directly to avoid the
        // cancellation in the running sums.
        double interior_sum = 0.0;
        double interior_count = 0.0;
        double ones = 0.0;
        for (Index l = i; l < j; ++l) {
          interior_sum += mult(l) * value(l);
          interior_count += mult(l);
        }
        for (Index l = j; l < n; ++l) ones += mult(l);
        return (k - ones - interior_sum) / interior_count;
      }
    }
    if (j < n && value(j) - value(i) <= 1.0) {
      sum_j += mult(j) * value(j);
      count_j += mult(j);
      ++j;
    } else {
      sum_i += mult(i) * value(i);
      count_i += mult(i);
      ++i;
    }
  }
  throw Infeasible("find_shift: no shift reaches trace " + std::to_string(k));
}

std::vector<double> apply_shift(std::span<const double> eigvals, double shift) {
  std::vector<double> out(eigvals.size());
  std::transform(eigvals.begin(), eigvals.end(), out.begin(),
                 [shift](double v) { return clamp01(v + shift); });
  return out;
}

EigenState project_capped_simplex(const EigenState& state, Index k) {
  check_target(k, state.dim(), "project_capped_simplex");
  std::vector<Index> column_group;
  Index complement_group = -1;
  const Spectrum spectrum = state.distinct(kMergeTolerance, &column_group, &complement_group);
  const double shift = find_shift(SpectrumView{spectrum.values, spectrum.mults, state.dim(),
                                               static_cast<double>(k)});
  const std::vector<double> projected = apply_shift(spectrum.values, shift);

  double complement = complement_group >= 0 ? projected[complement_group] : 0.0;
  if (complement <= kDropTolerance) complement = 0.0;

  std::vector<Index> keep;
  std::vector<double> kept_values;
  keep.reserve(column_group.size());
  for (std::size_t j = 0; j < column_group.size(); ++j) {
    const double v = projected[static_cast<std::size_t>(column_group[j])];
    if (complement == 0.0 && v <= kDropTolerance) continue;
    keep.push_back(static_cast<Index>(j));
    kept_values.push_back(v);
  }
  return select_columns(state, keep,
                        Eigen::Map<const Eigen::VectorXd>(kept_values.data(),
                                                          static_cast<Index>(kept_values.size())),
                        complement);
}

EigenState project_capped_rank(const EigenState& state, Index k, Index rank_cap) {
  check_target(k, state.dim(), "project_capped_rank");
  if (rank_cap < k) {
    throw Infeasible("project_capped_rank: rank cap " + std::to_string(rank_cap) +
                     " below target rank " + std::to_string(k));
  }
  const Index d = state.dim();
  if (rank_cap >= d) return project_capped_simplex(state, k);

  const Index m = state.columns();
  const double f = state.complement();
  const Eigen::VectorXd& values = state.values();

  // One slot per direction that may enter a support, descending by value.
  // Source -1 marks a direction taken from the complement.
  struct Slot {
    double value;
    Index source;
  };
  std::vector<Slot> slots;
  const Index pads = std::min(rank_cap, d - m);
  slots.reserve(static_cast<std::size_t>(m + pads));
  Index next = 0;
  while (next < m && values[next] >= f) slots.push_back({values[next], next++});
  for (Index p = 0; p < pads; ++p) slots.push_back({f, -1});
  while (next < m) slots.push_back({values[next], next++});

  const double complement_dims = static_cast<double>(d - m);
  const Index max_support = std::min<Index>(rank_cap, static_cast<Index>(slots.size()));
  double best_distance = std::numeric_limits<double>::infinity();
  Index best_support = -1;
  std::vector<double> best_values;
  std::vector<double> support_values;
  for (Index support = k; support <= max_support; ++support) {
    support_values.resize(static_cast<std::size_t>(support));
    Index pads_used = 0;
    for (Index l = 0; l < support; ++l) {
      support_values[static_cast<std::size_t>(l)] = slots[static_cast<std::size_t>(l)].value;
      pads_used += slots[static_cast<std::size_t>(l)].source < 0 ? 1 : 0;
    }
    const std::vector<Index> ones(static_cast<std::size_t>(support), 1);
    const double shift =
        find_shift(SpectrumView{support_values, ones, support, static_cast<double>(k)});
    std::vector<double> projected = apply_shift(support_values, shift);

    double distance = 0.0;
    for (Index l = 0; l < support; ++l) {
      const double delta = projected[static_cast<std::size_t>(l)] - support_values[l];
      distance += delta * delta;
    }
    for (auto l = static_cast<std::size_t>(support); l < slots.size(); ++l) {
      if (slots[l].source >= 0) distance += slots[l].value * slots[l].value;
    }
    distance += (complement_dims - static_cast<double>(pads_used)) * f * f;

    if (distance < best_distance) {
      best_distance = distance;
      best_support = support;
      best_values = std::move(projected);
    }
  }
  if (best_support < 0) throw Infeasible("project_capped_rank: no feasible support");

  std::vector<Index> keep;
  std::vector<double> kept_values;
  Index pads_needed = 0;
  for (Index l = 0; l < best_support; ++l) {
    const Slot& slot = slots[static_cast<std::size_t>(l)];
    const double v = best_values[static_cast<std::size_t>(l)];
    if (v <= kDropTolerance) continue;
    keep.push_back(slot.source);
    kept_values.push_back(v);
    pads_needed += slot.source < 0 ? 1 : 0;
  }

  Eigen::MatrixXd basis(d, static_cast<Index>(keep.size()));
  const Eigen::MatrixXd padding = complete_basis(state.basis(), pads_needed);
  Index pad_col = 0;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    basis.col(static_cast<Index>(j)) =
        keep[j] >= 0 ? state.basis().col(keep[j]) : padding.col(pad_col++);
  }
  EigenState out(std::move(basis),
                 Eigen::Map<const Eigen::VectorXd>(kept_values.data(),
                                                   static_cast<Index>(kept_values.size())),
                 0.0, EigenState::Check::kNone);
  return out.with_update_count(state.updates_since_reorthonormalization());
}

std::vector<double> entropic_log_projection(std::span<const double> log_values,
                                            std::span<const Index> mults, double target_trace) {
  if (log_values.size() != mults.size()) {
    throw DimensionMismatch("entropic projection: value and multiplicity lists differ in length");
  }
  if (log_values.empty()) throw DegenerateState("entropic projection: zero total mass");
  double positive_dims = 0.0;
  for (std::size_t g = 0; g < log_values.size(); ++g) {
    if (std::isnan(log_values[g]) || log_values[g] == std::numeric_limits<double>::infinity()) {
      throw NonFiniteInput("entropic projection: non-finite eigenvalue");
    }
    positive_dims += static_cast<double>(mults[g]);
  }
  if (target_trace > positive_dims + 1e-12) {
    throw Infeasible("entropic projection: trace " + std::to_string(target_trace) +
                     " exceeds the number of positive eigenvalues");
  }

  const std::size_t n = log_values.size();
  std::vector<bool> capped(n, false);
  double capped_dims = 0.0;
  double log_scale = 0.0;
  // The capped set only grows, so this terminates within n rounds.
  for (std::size_t round = 0; round <= n; ++round) {
    double max_term = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < n; ++g) {
      if (!capped[g]) max_term = std::max(max_term, log_values[g] + std::log(double(mults[g])));
    }
    const double remaining = target_trace - capped_dims;
    if (max_term == -std::numeric_limits<double>::infinity()) {
      if (std::abs(remaining) <= 1e-9) break;
      throw Infeasible("entropic projection: capped mass does not match the target trace");
    }
    if (remaining <= 0.0) throw Infeasible("entropic projection: nothing left to rescale");
    double lse = 0.0;
    for (std::size_t g = 0; g < n; ++g) {
      if (!capped[g]) lse += std::exp(log_values[g] + std::log(double(mults[g])) - max_term);
    }
    log_scale = std::log(remaining) - (max_term + std::log(lse));

    bool newly_capped = false;
    for (std::size_t g = 0; g < n; ++g) {
      if (!capped[g] && log_values[g] + log_scale > 0.0) {
        capped[g] = true;
        capped_dims += static_cast<double>(mults[g]);
        newly_capped = true;
      }
    }
    if (!newly_capped) break;
  }

  std::vector<double> out(n);
  for (std::size_t g = 0; g < n; ++g) out[g] = capped[g] ? 0.0 : log_values[g] + log_scale;
  return out;
}

EigenState project_entropic(const EigenState& state, Index k) {
  check_target(k, state.dim(), "project_entropic");
  std::vector<Index> column_group;
  Index complement_group = -1;
  const Spectrum spectrum = state.distinct(0.0, &column_group, &complement_group);

  std::vector<double> logs;
  std::vector<Index> mults;
  std::vector<Index> slot_of_group(spectrum.values.size(), -1);
  double mass = 0.0;
  for (std::size_t g = 0; g < spectrum.values.size(); ++g) {
    const double v = spectrum.values[g];
    if (v < 0.0) throw DegenerateState("project_entropic: negative eigenvalue");
    if (v == 0.0) continue;
    slot_of_group[g] = static_cast<Index>(logs.size());
    logs.push_back(std::log(v));
    mults.push_back(spectrum.mults[g]);
    mass += v * static_cast<double>(spectrum.mults[g]);
  }
  if (mass <= 0.0) throw DegenerateState("project_entropic: zero total mass");
  const std::vector<double> projected =
      entropic_log_projection(logs, mults, static_cast<double>(k));

  auto new_value = [&](Index group) {
    const Index slot = slot_of_group[static_cast<std::size_t>(group)];
    return slot < 0 ? 0.0 : std::exp(projected[static_cast<std::size_t>(slot)]);
  };
  Eigen::VectorXd values(state.columns());
  for (Index j = 0; j < state.columns(); ++j) values[j] = new_value(column_group[j]);
  const double complement = complement_group >= 0 ? new_value(complement_group) : 0.0;
  EigenState out(state.basis(), std::move(values), complement, EigenState::Check::kNone);
  return out.with_update_count(state.updates_since_reorthonormalization());
}

EigenState project_entropic_log(const EigenState& log_state, Index k) {
  check_target(k, log_state.dim(), "project_entropic_log");
  std::vector<Index> column_group;
  Index complement_group = -1;
  const Spectrum spectrum = log_state.distinct(0.0, &column_group, &complement_group);
  const std::vector<double> projected =
      entropic_log_projection(spectrum.values, spectrum.mults, static_cast<double>(k));

  Eigen::VectorXd values(log_state.columns());
  for (Index j = 0; j < log_state.columns(); ++j) {
    values[j] = projected[static_cast<std::size_t>(column_group[j])];
  }
  const double complement = complement_group >= 0 ? projected[complement_group] : 0.0;
  EigenState out(log_state.basis(), std::move(values), complement, EigenState::Check::kNone);
  return out.with_update_count(log_state.updates_since_reorthonormalization());
}

}  // namespace msgpca
