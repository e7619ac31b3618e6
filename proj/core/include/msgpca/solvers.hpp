#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "msgpca/data.hpp"
#include "msgpca/eigen_state.hpp"
#include "msgpca/rounding.hpp"

namespace msgpca {

enum class Algorithm { kMsg, kCappedMsg, kIncremental, kMeg, kStochasticPower };

enum class Schedule {
  kFixed,     // eta = c * sqrt(k / T)
  kDecaying,  // eta_t = c / sqrt(t), t = 1, 2, ...
};

std::string_view to_string(Algorithm algorithm);
std::string_view to_string(Schedule schedule);
// Accepts msg, capped (or capped-msg), incremental, meg, power.
Algorithm parse_algorithm(std::string_view name);
// Accepts fixed, decaying.
Schedule parse_schedule(std::string_view name);

struct SolverConfig {
  Algorithm algorithm = Algorithm::kMsg;
  Index dim = 0;
  Index k = 1;
  // Rank cap for capped MSG; 0 selects k + 1 (clamped to d).
  Index rank_cap = 0;
  Schedule schedule = Schedule::kDecaying;
  double c = 1.0;
  Index iterations = 0;
  std::uint64_t seed = 0;
  bool averaging = false;
  bool rounding = false;
  // The running average is kept as a dense d x d matrix up to this d.
  Index dense_average_limit = 4096;

  Index effective_rank_cap() const;
  // Throws InvalidConfig.
  void validate() const;
  double step_size(Index t) const;
};

// rank1_update followed by project_capped_simplex.
EigenState msg_step(const EigenState& state, const Sample& x, double eta, Index k);

// rank1_update followed by project_capped_rank.
EigenState capped_msg_step(const EigenState& state, const Sample& x, double eta, Index k,
                           Index rank_cap);

// M + x x^T truncated to its k largest eigenvalues. Ties at the cut keep the
// directions with the largest overlap with the previous basis.
EigenState incremental_step(const EigenState& state, const Sample& x, Index k);

// MEG iterate M = exp(L) kept through the log-spectrum L, so the exponentiated
// update exp(log M + eta x x^T) is a rank-1 update of L followed by the
// entropic projection in log space.
class MegState {
 public:
  // (k / d) I, the maximum-entropy feasible point.
  static MegState maximum_entropy(Index dim, Index k);
  // From a strictly positive definite state. Throws DegenerateState.
  static MegState from_spectrum(const EigenState& spectrum);

  const EigenState& log_spectrum() const { return log_; }
  // M itself.
  EigenState spectrum() const;
  Index dim() const { return log_.dim(); }

 private:
  explicit MegState(EigenState log_spectrum) : log_(std::move(log_spectrum)) {}
  friend MegState meg_step(const MegState&, const Sample&, double, Index);

  EigenState log_;
};

MegState meg_step(const MegState& state, const Sample& x, double eta, Index k);

// Orthonormalized U + eta x (x^T U). Throws DegenerateState when the columns
// become linearly dependent.
Eigen::MatrixXd power_step(const Eigen::MatrixXd& basis, const Sample& x, double eta);

// Random d x k orthonormal start for the stochastic power method.
Eigen::MatrixXd random_orthonormal(Index dim, Index k, std::uint64_t seed);

struct TraceRecord {
  Index t = 0;
  Index rank = 0;
  std::vector<double> eigenvalues;  // explicit eigenvalues, descending
  double complement = 0.0;
  double runtime_proxy = 0.0;  // sum_{s <= t} rank_s^2
  std::optional<double> suboptimality;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  EigenState final_state{1};
  std::optional<Eigen::MatrixXd> averaged;
  bool averaging_supported = true;
  std::optional<SubspaceMixture> mixture;
  std::optional<Eigen::MatrixXd> rounded_basis;
  std::uint64_t stream_checksum = 0;
};

// Evaluates an iterate, e.g. its suboptimality. Called at checkpoints.
using Evaluator = std::function<double(const EigenState&)>;

// Checkpoints are powers of two plus the final iteration.
bool is_checkpoint(Index t, Index iterations);

// FNV-1a over the raw bytes of a sample; chains from `seed`.
std::uint64_t checksum(const Sample& x, std::uint64_t seed);

// Runs config.iterations steps of the configured algorithm on `stream`.
// Throws StreamExhausted when the stream ends early.
RunTrace run(const SolverConfig& config, Sampler& stream, const Evaluator& evaluator = {});

}  // namespace msgpca
