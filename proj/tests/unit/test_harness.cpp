#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "msgpca/error.hpp"
#include "msgpca/harness.hpp"
#include "test_util.hpp"

namespace msgpca {
namespace {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("msgpca-harness-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class PointMass final : public Sampler {
 public:
  explicit PointMass(VectorXd x) : x_(std::move(x)) {}
  Index dim() const override { return x_.size(); }
  Sample next() override { return x_; }
  std::unique_ptr<Sampler> clone(std::uint64_t) const override {
    return std::make_unique<PointMass>(x_);
  }

 private:
  VectorXd x_;
};

TEST(PopulationSuboptimality, Examples) {
  const ObjectiveOracle oracle = ObjectiveOracle::closed_form(Eigen::Vector3d(0.5, 0.3, 0.2));
  const EigenState e2(MatrixXd::Identity(3, 3).col(1), VectorXd::Ones(1));
  EXPECT_NEAR(population_suboptimality(e2, oracle, 1), 0.2, 1e-15);
  const EigenState top(MatrixXd::Identity(3, 2), VectorXd::Constant(2, 0.5));
  EXPECT_NEAR(population_suboptimality(top, oracle, 2), 0.0, 1e-15);
  EXPECT_NEAR(oracle.optimum(2), 0.8, 1e-15);
}

TEST(PopulationSuboptimality, PadsMissingDirections) {
  const ObjectiveOracle oracle = ObjectiveOracle::closed_form(Eigen::Vector3d(0.5, 0.3, 0.2));
  // No preferred directions: the average over all 2-subspaces captures 2/3.
  EXPECT_NEAR(population_suboptimality(EigenState(3), oracle, 2), 0.8 - 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(population_suboptimality(EigenState(3, 0.4), oracle, 1), 0.5 - 1.0 / 3.0, 1e-15);
  // One explicit direction e3, the rest from its complement {e1, e2}.
  const EigenState e3(MatrixXd::Identity(3, 3).col(2), VectorXd::Ones(1));
  EXPECT_NEAR(population_suboptimality(e3, oracle, 2), 0.8 - 0.2 - 0.5 * 0.8, 1e-15);
  // Explicit zero eigenvalues belong to the tied block as well.
  const EigenState zeros(MatrixXd::Identity(3, 3).leftCols(2), VectorXd::Zero(2));
  EXPECT_NEAR(population_suboptimality(zeros, oracle, 1), 0.5 - 1.0 / 3.0, 1e-15);
}

TEST(PopulationSuboptimality, RandomSubspaceExpectation) {
  // For a uniformly random k-subspace, E tr(Sigma P) = (k / d) tr Sigma.
  OrthogonalDistribution dist(32, 1.1, 0);
  const ObjectiveOracle oracle = ObjectiveOracle::closed_form(dist.second_moments());
  const double optimum = dist.second_moments().head(4).sum();
  EXPECT_NEAR(oracle.optimum(4), optimum, 1e-15);
  std::mt19937_64 rng(1);
  const int n = 4000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const EigenState s(random_basis(rng, 32, 4), VectorXd::Constant(4, 1.0));
    const double v = population_suboptimality(s, oracle, 4);
    EXPECT_GE(v, -1e-10);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, optimum - 4.0 / 32.0, 4.0 * se);
}

TEST(EmpiricalObjective, Examples) {
  MatrixXd samples(2, 2);
  samples << 1, 0, 0, 1;
  const EigenState identity(MatrixXd::Identity(2, 2), VectorXd::Ones(2));
  EXPECT_NEAR(empirical_objective(identity, samples), 1.0, 1e-15);
  EXPECT_EQ(empirical_objective(EigenState(2), samples), 0.0);
  const EigenState e1(MatrixXd::Identity(2, 1), VectorXd::Ones(1));
  EXPECT_NEAR(empirical_objective(e1, samples), 0.5, 1e-15);
  EXPECT_NEAR(empirical_objective(MatrixXd(MatrixXd::Identity(2, 1)), samples), 0.5, 1e-15);
  EXPECT_THROW(empirical_objective(e1, MatrixXd(0, 2)), DimensionMismatch);
  EXPECT_THROW(empirical_objective(e1, MatrixXd::Ones(2, 3)), DimensionMismatch);
}

TEST(EmpiricalObjective, MatchesDenseFormula) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    EigenState s = random_state(rng, 6, 3);
    s = EigenState(s.basis(), s.values(), trial % 2 == 0 ? 0.0 : 0.3);
    MatrixXd x(40, 6);
    for (Index i = 0; i < 40; ++i) x.row(i) = random_vector(rng, 6).transpose();
    const MatrixXd m = reconstruct(s);
    const double dense = (x * m * x.transpose()).trace() / 40.0;
    EXPECT_NEAR(empirical_objective(s, x), dense, 1e-10);
    EXPECT_NEAR(ObjectiveOracle::empirical(x).objective(s), dense, 1e-10);
  }
}

TEST(ObjectiveOracle, ClosedFormAndEmpiricalAgree) {
  OrthogonalDistribution dist(16, 1.2, 11);
  const ObjectiveOracle closed = ObjectiveOracle::closed_form(dist.second_moments());
  const int n = 100000;
  MatrixXd samples(n, 16);
  for (int i = 0; i < n; ++i) samples.row(i) = dist.next().transpose();
  std::mt19937_64 rng(3);
  const EigenState s = random_state(rng, 16, 4, 0.0, 1.0);
  const MatrixXd m = reconstruct(s);
  const VectorXd per_sample = (samples * m).cwiseProduct(samples).rowwise().sum();
  const double mean = per_sample.mean();
  const double se = std::sqrt((per_sample.array() - mean).square().sum() / (n - 1.0) / n);
  EXPECT_NEAR(empirical_objective(s, samples), mean, 1e-12);
  EXPECT_NEAR(closed.objective(s), mean, 3.0 * se);
  EXPECT_NEAR(ObjectiveOracle::empirical(samples).optimum(4), closed.optimum(4), 0.01);
}

TEST(RuntimeProxy, Examples) {
  EXPECT_EQ(runtime_proxy(std::vector<Index>{1, 1, 1}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(runtime_proxy(std::vector<Index>{1, 2, 3}), (std::vector<double>{1, 5, 14}));
}

TEST(RuntimeProxy, IncrementalRankOneIsLinear) {
  TrapDistribution trap(1);
  SolverConfig c;
  c.algorithm = Algorithm::kIncremental;
  c.dim = 2;
  c.k = 1;
  c.iterations = 50;
  const RunTrace trace = run(c, trap);
  const std::vector<double> proxy = runtime_proxy(trace);
  for (std::size_t t = 0; t < proxy.size(); ++t) {
    EXPECT_EQ(proxy[t], static_cast<double>(t + 1));
    EXPECT_EQ(trace.records[t].runtime_proxy, proxy[t]);
  }
}

SolverConfig msg_config(Index d, Index k, Index T, std::uint64_t seed) {
  SolverConfig c;
  c.algorithm = Algorithm::kMsg;
  c.dim = d;
  c.k = k;
  c.iterations = T;
  c.seed = seed;
  return c;
}

TEST(GridSearch, SingletonGrid) {
  TrapDistribution trap(0);
  const auto oracle = ObjectiveOracle::closed_form(TrapDistribution::second_moments());
  EXPECT_EQ(grid_search(msg_config(2, 1, 64, 1), {0.3}, trap, oracle).best_c, 0.3);
}

TEST(GridSearch, TiesGoToSmallestConstant) {
  const PointMass stream(VectorXd::Unit(3, 0));
  const auto oracle = ObjectiveOracle::closed_form(Eigen::Vector3d(1.0, 0.0, 0.0));
  const GridResult r = grid_search(msg_config(3, 1, 32, 1), {4.0, 0.5, 2.0, 1.0}, stream, oracle);
  for (const auto& p : r.points) EXPECT_NEAR(p.score, 0.0, 1e-12);
  EXPECT_EQ(r.best_c, 0.5);
  ASSERT_EQ(r.points.size(), 4u);
  EXPECT_EQ(r.points.front().c, 0.5);
}

TEST(GridSearch, TrapSelectionIsReproducible) {
  TrapDistribution trap(0);
  const auto oracle = ObjectiveOracle::closed_form(TrapDistribution::second_moments());
  std::vector<double> grid;
  for (int e = -3; e <= 3; ++e) grid.push_back(std::ldexp(1.0, e));
  const GridResult a = grid_search(msg_config(2, 1, 256, 5), grid, trap, oracle, 1);
  const GridResult b = grid_search(msg_config(2, 1, 256, 5), grid, trap, oracle, 4);
  EXPECT_EQ(a.best_c, b.best_c);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(a.points[i].score, b.points[i].score);
}

TEST(GridSearch, EmptyGridIsAnError) {
  TrapDistribution trap(0);
  const auto oracle = ObjectiveOracle::closed_form(TrapDistribution::second_moments());
  EXPECT_THROW(grid_search(msg_config(2, 1, 8, 1), {}, trap, oracle), InvalidConfig);
}

TEST(DefaultGrid, IsMonotonePowersOfTwo) {
  const std::vector<double> g = default_step_grid();
  ASSERT_EQ(g.size(), 18u);
  EXPECT_EQ(g.front(), std::ldexp(1.0, -12));
  EXPECT_EQ(g.back(), 32.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_EQ(g[i], 2.0 * g[i - 1]);
}

const char* kTwoByTwo = R"(
name: two
k: 2
iterations: 64
seeds: [3, 4]
sampler: {kind: orthogonal, d: 8, tau: 1.3}
algorithms:
  - {label: msg, algorithm: msg, c: 1.0}
  - {label: capped, algorithm: capped, K: 3, c: 1.0}
)";

TEST(ExperimentSpec, ParsesAllForms) {
  const ExperimentSpec spec = parse_experiment_spec(kTwoByTwo);
  EXPECT_EQ(spec.name, "two");
  EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(spec.sampler.dim, 8);
  ASSERT_EQ(spec.algorithms.size(), 2u);
  EXPECT_EQ(spec.algorithms[1].algorithm, Algorithm::kCappedMsg);
  EXPECT_EQ(spec.algorithms[1].rank_cap, 3);
  EXPECT_EQ(spec.grid, default_step_grid());

  const ExperimentSpec ranged = parse_experiment_spec(R"(
k: 1
iterations: 10
seeds: {first: 10, count: 3}
grid: {min_exponent: -2, max_exponent: 1}
sampler: {kind: trap}
algorithms: [{algorithm: incremental}]
)");
  EXPECT_EQ(ranged.seeds, (std::vector<std::uint64_t>{10, 11, 12}));
  EXPECT_EQ(ranged.grid, (std::vector<double>{0.25, 0.5, 1.0, 2.0}));
  EXPECT_EQ(ranged.algorithms[0].label, "incremental");
  EXPECT_EQ(ranged.sampler.dim, 2);
}

TEST(ExperimentSpec, RejectsBadSpecs) {
  EXPECT_THROW(parse_experiment_spec("k: [1"), SpecError);
  EXPECT_THROW(parse_experiment_spec(std::string(kTwoByTwo) + "colour: red\n"), SpecError);
  EXPECT_THROW(parse_experiment_spec("k: 1\niterations: 5\nseeds: [1]\n"
                                     "sampler: {kind: gaussian}\n"
                                     "algorithms: [{algorithm: msg}]\n"),
               SpecError);
  EXPECT_THROW(parse_experiment_spec("k: 3\niterations: 5\nseeds: [1]\n"
                                     "sampler: {kind: trap}\n"
                                     "algorithms: [{algorithm: msg}]\n"),
               SpecError);
  EXPECT_THROW(parse_experiment_spec("k: 1\niterations: 5\nseeds: [1]\n"
                                     "sampler: {kind: trap}\n"
                                     "algorithms: [{algorithm: sgd}]\n"),
               SpecError);
  EXPECT_THROW(parse_experiment_spec("k: 1\niterations: 5\nseeds: [1]\n"
                                     "sampler: {kind: trap}\n"
                                     "algorithms: [{algorithm: msg}, {algorithm: msg}]\n"),
               SpecError);
  EXPECT_THROW(load_experiment_spec("/nonexistent/path.spec"), SpecError);
}

TEST(RunExperiment, FileCountContractAndDeterminism) {
  ExperimentSpec spec = parse_experiment_spec(kTwoByTwo);
  spec.output = scratch("contract");
  const ExperimentResult r = run_experiment(spec);
  EXPECT_EQ(r.trace_files.size(), 4u);
  std::size_t traces = 0;
  for (const auto& entry : fs::directory_iterator(spec.output / "traces")) {
    traces += entry.path().extension() == ".csv" ? 1 : 0;
  }
  EXPECT_EQ(traces, 4u);
  EXPECT_TRUE(fs::exists(spec.output / "aggregate.csv"));
  EXPECT_TRUE(fs::exists(spec.output / "plot.py"));
  EXPECT_TRUE(r.identical_streams);

  const std::string aggregate = slurp(r.aggregate_file);
  const std::string trace = slurp(r.trace_files.front());
  spec.threads = 1;
  run_experiment(spec);
  EXPECT_EQ(slurp(r.aggregate_file), aggregate);
  EXPECT_EQ(slurp(r.trace_files.front()), trace);
  fs::remove_all(spec.output);
}

TEST(RunExperiment, TraceCsvSchema) {
  ExperimentSpec spec = parse_experiment_spec(kTwoByTwo);
  spec.output = scratch("schema");
  const ExperimentResult r = run_experiment(spec);
  std::ifstream in(r.trace_files.front());
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, "t,rank,suboptimality,runtime_proxy,eigenvalues,complement");
  EXPECT_EQ(first.rfind("1,", 0), 0u);
  EXPECT_NE(first.find('"'), std::string::npos);
  int lines = 2;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 64);
  fs::remove_all(spec.output);
}

TEST(RunExperiment, TrapReportsE1Frequency) {
  ExperimentSpec spec = parse_experiment_spec(R"(
name: trap
k: 1
iterations: 200
seeds: {first: 1, count: 400}
sampler: {kind: trap}
write_traces: false
algorithms: [{label: incremental, algorithm: incremental}]
)");
  spec.output = scratch("trap");
  const ExperimentResult r = run_experiment(spec);
  ASSERT_EQ(r.algorithms.size(), 1u);
  const double p = r.algorithms[0].final().top_e1_fraction;
  EXPECT_NEAR(p, 5.0 / 9.0, 4.0 * std::sqrt(20.0 / 81.0 / 400.0));
  EXPECT_TRUE(r.trace_files.empty());
  EXPECT_NE(slurp(r.aggregate_file).find("top_e1_fraction"), std::string::npos);
  fs::remove_all(spec.output);
}

TEST(RunExperiment, EveryAlgorithmImprovesOnOrthogonalDistribution) {
  ExperimentSpec spec = parse_experiment_spec(R"(
name: improve
k: 4
iterations: 16384
seeds: [1, 2, 3]
sampler: {kind: orthogonal, d: 32, tau: 1.1}
write_traces: false
algorithms:
  - {label: msg, algorithm: msg, c: 1.0}
  - {label: capped, algorithm: capped, c: 1.0}
  - {label: incremental, algorithm: incremental}
  - {label: meg, algorithm: meg, c: 1.0}
  - {label: power, algorithm: power, c: 1.0}
)");
  spec.output = scratch("improve");
  const ExperimentResult r = run_experiment(spec);
  OrthogonalDistribution dist(32, 1.1);
  const auto oracle = ObjectiveOracle::closed_form(dist.second_moments());
  const double initial = population_suboptimality(EigenState(32), oracle, 4);
  for (const auto& a : r.algorithms) {
    EXPECT_LT(a.final().mean_suboptimality, initial) << a.label;
    EXPECT_LT(a.final().mean_suboptimality, a.checkpoints.front().mean_suboptimality) << a.label;
  }
  fs::remove_all(spec.output);
}

TEST(RunExperiment, TuningWritesScores) {
  ExperimentSpec spec = parse_experiment_spec(R"(
name: tune
k: 1
iterations: 128
seeds: [1]
grid: [0.25, 1.0, 4.0]
sampler: {kind: trap}
algorithms: [{label: msg, algorithm: msg, tune: true}]
)");
  spec.output = scratch("tune");
  const ExperimentResult r = run_experiment(spec);
  ASSERT_TRUE(r.algorithms[0].tuning.has_value());
  EXPECT_EQ(r.algorithms[0].c, r.algorithms[0].tuning->best_c);
  EXPECT_TRUE(fs::exists(spec.output / "tuning.csv"));
  const auto tuned = grid_search(spec);
  EXPECT_EQ(tuned.at("msg").best_c, r.algorithms[0].c);
  fs::remove_all(spec.output);
}

}  // namespace
}  // namespace msgpca
