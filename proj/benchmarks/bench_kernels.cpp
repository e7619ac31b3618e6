#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "msgpca/data.hpp"
#include "msgpca/projection.hpp"
#include "msgpca/solvers.hpp"

namespace {

using msgpca::EigenState;
using msgpca::Index;

Eigen::MatrixXd orthonormal(std::mt19937_64& rng, Index d, Index m) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(d, m);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() * Eigen::MatrixXd::Identity(d, m);
}

EigenState random_state(std::mt19937_64& rng, Index d, Index m) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::VectorXd v(m);
  for (Index i = 0; i < m; ++i) v[i] = u(rng);
  return EigenState(orthonormal(rng, d, m), v);
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Index d) {
  std::normal_distribution<double> g;
  Eigen::VectorXd x(d);
  for (Index i = 0; i < d; ++i) x[i] = g(rng);
  return x / x.norm();
}

// Args: d, explicit rank m.
void BM_Rank1Update(benchmark::State& st) {
  std::mt19937_64 rng(1);
  const Index d = st.range(0), m = st.range(1);
  const EigenState s = random_state(rng, d, m);
  const Eigen::VectorXd x = random_vector(rng, d);
  for (auto _ : st) benchmark::DoNotOptimize(msgpca::rank1_update(s, x, 0.1));
}
BENCHMARK(BM_Rank1Update)->ArgsProduct({{64, 784}, {4, 16, 64}});

// Arg: number of distinct eigenvalues.
void BM_FindShift(benchmark::State& st) {
  std::mt19937_64 rng(2);
  const auto n = static_cast<std::size_t>(st.range(0));
  std::vector<double> values(n);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  for (auto& v : values) v = u(rng);
  std::sort(values.begin(), values.end(), std::greater<>());
  const std::vector<Index> mults(n, 1);
  const msgpca::SpectrumView view{values, mults, static_cast<Index>(n) + 10, 4.0};
  for (auto _ : st) benchmark::DoNotOptimize(msgpca::find_shift(view));
  st.SetComplexityN(static_cast<Index>(n));
}
BENCHMARK(BM_FindShift)->RangeMultiplier(4)->Range(4, 4096)->Complexity(benchmark::oNLogN);

// Full solver steps on the orthogonal distribution from a warmed-up iterate.
template <class Step>
void run_steps(benchmark::State& st, Step step) {
  const Index d = st.range(0);
  const Index k = 4;
  msgpca::OrthogonalDistribution dist(d, 1.1, 3);
  EigenState s(d);
  for (int t = 1; t <= 200; ++t) s = step(s, dist.next(), 1.0 / std::sqrt(t), k);
  const Eigen::VectorXd x = dist.next();
  for (auto _ : st) benchmark::DoNotOptimize(step(s, x, 0.02, k));
  st.counters["rank"] = static_cast<double>(s.rank());
}

void BM_MsgStep(benchmark::State& st) {
  run_steps(st, [](const EigenState& s, const msgpca::Sample& x, double eta, Index k) {
    return msgpca::msg_step(s, x, eta, k);
  });
}
BENCHMARK(BM_MsgStep)->Arg(32)->Arg(256);

void BM_CappedMsgStep(benchmark::State& st) {
  run_steps(st, [](const EigenState& s, const msgpca::Sample& x, double eta, Index k) {
    return msgpca::capped_msg_step(s, x, eta, k, k + 1);
  });
}
BENCHMARK(BM_CappedMsgStep)->Arg(32)->Arg(256);

void BM_IncrementalStep(benchmark::State& st) {
  run_steps(st, [](const EigenState& s, const msgpca::Sample& x, double, Index k) {
    return msgpca::incremental_step(s, x, k);
  });
}
BENCHMARK(BM_IncrementalStep)->Arg(32)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
