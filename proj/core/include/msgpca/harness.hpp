#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msgpca/data.hpp"
#include "msgpca/eigen_state.hpp"
#include "msgpca/solvers.hpp"

namespace msgpca {

// Second-moment oracle for the PCA objective E[x^T M x]. Either closed-form
// (known diagonal covariance) or empirical (held-out samples).
class ObjectiveOracle {
 public:
  static ObjectiveOracle closed_form(Eigen::VectorXd second_moment_diagonal);
  // One sample per row.
  static ObjectiveOracle empirical(const Eigen::MatrixXd& samples);

  bool is_closed_form() const { return closed_form_; }
  Index dim() const { return eigenvalues_.size(); }
  // Sum of the k largest eigenvalues of the second moment.
  double optimum(Index k) const;
  // tr(B^T C B) for a basis with orthonormal columns.
  double objective(const Eigen::MatrixXd& basis) const;
  // tr(C M).
  double objective(const EigenState& state) const;

 private:
  ObjectiveOracle() = default;

  bool closed_form_ = false;
  Eigen::VectorXd diagonal_;       // closed form
  Eigen::MatrixXd second_moment_;  // empirical
  Eigen::VectorXd eigenvalues_;    // descending
};

// optimum(k) - objective(P) where P projects onto the k leading eigenvectors
// of the iterate. When the cut falls inside a block of eigenvalues tied with
// the complement (e.g. the zero eigenspace of a low-rank iterate), P is
// averaged over that block.
double population_suboptimality(const EigenState& state, const ObjectiveOracle& oracle, Index k);

// (1/n) sum_i x_i^T M x_i over the rows of `samples`, in O(n d m).
double empirical_objective(const EigenState& state, const Eigen::MatrixXd& samples);
// Same for the projector onto an orthonormal basis.
double empirical_objective(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& samples);

// Cumulative sum of squared ranks.
std::vector<double> runtime_proxy(const std::vector<Index>& ranks);
std::vector<double> runtime_proxy(const RunTrace& trace);

struct GridPoint {
  double c = 0.0;
  double score = 0.0;  // mean checkpoint suboptimality
};

struct GridResult {
  double best_c = 0.0;
  std::vector<GridPoint> points;  // ascending c
};

// Runs `base` once per step constant on a fresh clone of `train` (same seed
// each time) and scores it by the mean validation suboptimality over the
// run's checkpoints. Returns the argmin; ties go to the smaller c.
GridResult grid_search(const SolverConfig& base, const std::vector<double>& grid,
                       const Sampler& train, const ObjectiveOracle& validation,
                       unsigned threads = 1);

// c in {2^-12, 2^-11, ..., 2^5}.
std::vector<double> default_step_grid();

// ---------------------------------------------------------------------------
// Experiments

enum class SourceKind { kOrthogonal, kTrap, kIdx };

struct SamplerSpec {
  SourceKind kind = SourceKind::kOrthogonal;
  Index dim = 32;
  double tau = 1.1;
  std::filesystem::path images;  // kIdx only
  bool normalize = true;          // kIdx only
};

struct AlgorithmSpec {
  std::string label;
  Algorithm algorithm = Algorithm::kMsg;
  Index rank_cap = 0;
  Schedule schedule = Schedule::kDecaying;
  double c = 1.0;
  bool tune = false;
  bool averaging = false;
  bool rounding = false;
};

struct ExperimentSpec {
  std::string name = "experiment";
  SamplerSpec sampler;
  Index k = 1;
  // 0 for data sets means one pass over the training split.
  Index iterations = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> grid = default_step_grid();
  std::vector<AlgorithmSpec> algorithms;
  std::filesystem::path output = "experiment-out";
  bool write_traces = true;
  unsigned threads = 0;  // 0 = hardware concurrency

  // Throws SpecError.
  void validate() const;
};

// Parses the YAML experiment description. Relative data paths are resolved
// against `base_dir`. Throws SpecError.
ExperimentSpec parse_experiment_spec(const std::string& text,
                                     const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct CheckpointStats {
  Index t = 0;
  double mean_suboptimality = 0.0;
  double se_suboptimality = 0.0;
  double mean_rank = 0.0;
  double mean_runtime_proxy = 0.0;
  double top_e1_fraction = 0.0;
};

struct AlgorithmSummary {
  std::string label;
  double c = 0.0;
  std::size_t seeds = 0;
  std::vector<CheckpointStats> checkpoints;
  std::optional<GridResult> tuning;
  std::optional<double> mean_rounded_suboptimality;
  std::optional<double> se_rounded_suboptimality;

  const CheckpointStats& final() const { return checkpoints.back(); }
};

struct ExperimentResult {
  std::vector<AlgorithmSummary> algorithms;
  std::vector<std::filesystem::path> trace_files;
  std::filesystem::path aggregate_file;
  std::filesystem::path plot_script;
  // Every algorithm consumed the same samples for a given seed.
  bool identical_streams = true;
};

// Step constants per algorithm label, tuned where requested.
std::map<std::string, GridResult> grid_search(const ExperimentSpec& spec);

// Runs every (seed, algorithm) cell, writes per-run trace CSVs, the aggregate
// CSV and a plotting script into spec.output. Seeds run in parallel; results
// are merged in seed order so the output is deterministic.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// CSV text for one run (header included).
std::string trace_csv(const RunTrace& trace);

}  // namespace msgpca
