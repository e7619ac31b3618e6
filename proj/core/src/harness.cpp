#include "msgpca/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iterator>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "msgpca/dense_eig.hpp"
#include "msgpca/error.hpp"

namespace msgpca {
namespace {

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const auto n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

// Index of the coordinate carrying the largest weight of the top direction.
bool top_direction_is_e1(const EigenState& state) {
  const Eigen::MatrixXd top = top_directions(state, 1);
  Index arg = 0;
  top.col(0).cwiseAbs().maxCoeff(&arg);
  return arg == 0;
}

// Per-seed view of the data: the training stream and the two oracles.
struct SeedContext {
  std::unique_ptr<Sampler> train;
  std::optional<ObjectiveOracle> validation;
  std::optional<ObjectiveOracle> test;
  Index iterations = 0;
};

class ContextFactory {
 public:
  explicit ContextFactory(const ExperimentSpec& spec) : spec_(spec) {
    switch (spec.sampler.kind) {
      case SourceKind::kOrthogonal: {
        auto proto = std::make_unique<OrthogonalDistribution>(spec.sampler.dim, spec.sampler.tau, 0);
        moments_ = proto->second_moments();
        prototype_ = std::move(proto);
        break;
      }
      case SourceKind::kTrap:
        prototype_ = std::make_unique<TrapDistribution>(0);
        moments_ = TrapDistribution::second_moments();
        break;
      case SourceKind::kIdx:
        raw_ = std::make_shared<DatasetSource>(load_dataset(spec.sampler.images));
        if (raw_->size() < 5) throw DataError("data set needs at least 5 samples");
        break;
    }
  }

  Index dim() const { return raw_ ? raw_->dim() : prototype_->dim(); }

  SeedContext make(std::uint64_t seed) const {
    SeedContext ctx;
    if (prototype_) {
      ctx.train = prototype_->clone(seed);
      ctx.validation = ObjectiveOracle::closed_form(moments_);
      ctx.test = ctx.validation;
      ctx.iterations = spec_.iterations;
      return ctx;
    }
    auto data = std::make_shared<DatasetSource>();
    data->rows = raw_->rows;
    data->split = split(raw_->size(), seed);
    if (spec_.sampler.normalize) *data = normalize(*data);
    const Split& s = *data->split;
    const auto train_size = static_cast<Index>(s.train.size());
    ctx.iterations = spec_.iterations == 0 ? train_size : spec_.iterations;
    if (ctx.iterations > train_size) {
      throw SpecError(fmt::format("iterations = {} exceed the {} training samples",
                                  ctx.iterations, train_size));
    }
    ctx.validation = ObjectiveOracle::empirical(data->gather(s.validation));
    ctx.test = ObjectiveOracle::empirical(data->gather(s.test));
    ctx.train = std::make_unique<DatasetSampler>(data, s.train, seed);
    return ctx;
  }

 private:
  const ExperimentSpec& spec_;
  std::unique_ptr<Sampler> prototype_;
  Eigen::VectorXd moments_;
  std::shared_ptr<DatasetSource> raw_;
};

SolverConfig make_config(const ExperimentSpec& spec, const AlgorithmSpec& algo, Index dim,
                         Index iterations, std::uint64_t seed, double c) {
  SolverConfig cfg;
  cfg.algorithm = algo.algorithm;
  cfg.dim = dim;
  cfg.k = spec.k;
  cfg.rank_cap = algo.rank_cap;
  cfg.schedule = algo.schedule;
  cfg.c = c;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.averaging = algo.averaging;
  cfg.rounding = algo.rounding;
  return cfg;
}

// Checkpoint-level outcome of one (seed, algorithm) cell.
struct CellResult {
  RunTrace trace;
  std::vector<double> suboptimality;
  std::vector<Index> checkpoint_t;
  std::vector<bool> e1;
  std::optional<double> rounded_suboptimality;
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string plot_script(const ExperimentSpec& spec) {
  std::string labels;
  for (const auto& a : spec.algorithms) labels += fmt::format("\"{}\", ", a.label);
  const std::uint64_t first_seed = spec.seeds.empty() ? 0 : spec.seeds.front();
  return fmt::format(R"PY(#!/usr/bin/env python3
# Renders the aggregate and per-run traces of the "{name}" experiment.
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
LABELS = [{labels}]
FIRST_SEED = {seed}


def read(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


agg = read(os.path.join(HERE, "aggregate.csv"))
fig, axes = plt.subplots(2, 2, figsize=(11, 8))
ax_it, ax_rt, ax_rank, ax_spec = axes.ravel()
for label in LABELS:
    rows = [r for r in agg if r["algorithm"] == label]
    if not rows:
        continue
    t = [float(r["t"]) for r in rows]
    rt = [float(r["mean_runtime_proxy"]) for r in rows]
    m = [max(float(r["mean_suboptimality"]), 1e-12) for r in rows]
    se = [float(r["se_suboptimality"]) for r in rows]
    lo = [max(a - 2 * b, 1e-12) for a, b in zip(m, se)]
    hi = [a + 2 * b for a, b in zip(m, se)]
    ax_it.plot(t, m, label=label)
    ax_it.fill_between(t, lo, hi, alpha=0.2)
    ax_rt.plot(rt, m, label=label)
    ax_rt.fill_between(rt, lo, hi, alpha=0.2)

    trace = os.path.join(HERE, "traces", "{{}}_seed{{}}.csv".format(label, FIRST_SEED))
    if os.path.exists(trace):
        tr = read(trace)
        ax_rank.plot([int(r["t"]) for r in tr], [int(r["rank"]) for r in tr], label=label)
        if label == LABELS[0]:
            for r in tr:
                vals = [float(v) for v in r["eigenvalues"].split(";") if v]
                ax_spec.scatter([int(r["t"])] * len(vals), vals, s=0.2, c="k")

ax_it.set(xscale="log", yscale="log", xlabel="iterations", ylabel="suboptimality")
ax_rt.set(xscale="log", yscale="log", xlabel="sum of squared ranks", ylabel="suboptimality")
ax_rank.set(xscale="log", xlabel="iterations", ylabel="rank (seed {{}})".format(FIRST_SEED))
ax_spec.set(xscale="log", xlabel="iterations", ylabel="eigenvalues ({{}})".format(LABELS[0]))
for ax in (ax_it, ax_rt, ax_rank):
    ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "{name}.png"), dpi=120)
)PY",
                     fmt::arg("name", spec.name), fmt::arg("labels", labels),
                     fmt::arg("seed", first_seed));
}

// --- YAML helpers ---------------------------------------------------------

void check_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw SpecError(where + ": expected a table");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw SpecError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get(const YAML::Node& node, const std::string& key, const std::string& where, T fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw SpecError(where + "." + key + ": malformed value");
  }
}

std::vector<double> parse_grid(const YAML::Node& node) {
  std::vector<double> grid;
  if (node.IsSequence()) {
    for (const auto& v : node) {
      try {
        grid.push_back(v.as<double>());
      } catch (const YAML::Exception&) {
        throw SpecError("grid: entries must be numbers");
      }
    }
  } else if (node.IsMap()) {
    check_keys(node, "grid", {"base", "min_exponent", "max_exponent"});
    const double base = get<double>(node, "base", "grid", 2.0);
    const int lo = get<int>(node, "min_exponent", "grid", -12);
    const int hi = get<int>(node, "max_exponent", "grid", 5);
    if (lo > hi) throw SpecError("grid: min_exponent exceeds max_exponent");
    for (int e = lo; e <= hi; ++e) grid.push_back(std::pow(base, e));
  } else {
    throw SpecError("grid: expected a list or a table");
  }
  return grid;
}

std::vector<std::uint64_t> parse_seeds(const YAML::Node& node) {
  std::vector<std::uint64_t> seeds;
  if (node.IsSequence()) {
    for (const auto& v : node) {
      try {
        seeds.push_back(v.as<std::uint64_t>());
      } catch (const YAML::Exception&) {
        throw SpecError("seeds: entries must be nonnegative integers");
      }
    }
  } else if (node.IsMap()) {
    check_keys(node, "seeds", {"first", "count"});
    const auto first = get<std::uint64_t>(node, "first", "seeds", 1);
    const auto count = get<std::uint64_t>(node, "count", "seeds", 1);
    for (std::uint64_t i = 0; i < count; ++i) seeds.push_back(first + i);
  } else if (node.IsScalar()) {
    try {
      seeds.push_back(node.as<std::uint64_t>());
    } catch (const YAML::Exception&) {
      throw SpecError("seeds: malformed value");
    }
  } else {
    throw SpecError("seeds: expected a list, a table or an integer");
  }
  return seeds;
}

}  // namespace

// --- oracles ----------------------------------------------------------------

ObjectiveOracle ObjectiveOracle::closed_form(Eigen::VectorXd second_moment_diagonal) {
  if (second_moment_diagonal.size() == 0) throw DimensionMismatch("oracle: empty diagonal");
  if (!second_moment_diagonal.allFinite()) throw NonFiniteInput("oracle: non-finite diagonal");
  ObjectiveOracle o;
  o.closed_form_ = true;
  o.diagonal_ = std::move(second_moment_diagonal);
  o.eigenvalues_ = o.diagonal_;
  std::sort(o.eigenvalues_.begin(), o.eigenvalues_.end(), std::greater<>());
  return o;
}

ObjectiveOracle ObjectiveOracle::empirical(const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0 || samples.cols() == 0) {
    throw DimensionMismatch("oracle: empty sample set");
  }
  if (!samples.allFinite()) throw NonFiniteInput("oracle: non-finite samples");
  ObjectiveOracle o;
  o.second_moment_ = (samples.transpose() * samples) / static_cast<double>(samples.rows());
  o.second_moment_ = 0.5 * (o.second_moment_ + o.second_moment_.transpose()).eval();
  o.eigenvalues_ = dense_eigensymm(o.second_moment_).values;
  return o;
}

double ObjectiveOracle::optimum(Index k) const {
  if (k < 0 || k > dim()) throw Infeasible("oracle: k exceeds the dimension");
  return eigenvalues_.head(k).sum();
}

double ObjectiveOracle::objective(const Eigen::MatrixXd& basis) const {
  if (basis.rows() != dim()) throw DimensionMismatch("oracle: basis dimension mismatch");
  if (closed_form_) {
    return (basis.array().square().colwise() * diagonal_.array()).sum();
  }
  return (basis.transpose() * second_moment_ * basis).trace();
}

double ObjectiveOracle::objective(const EigenState& state) const {
  if (state.dim() != dim()) throw DimensionMismatch("oracle: state dimension mismatch");
  const Eigen::MatrixXd& u = state.basis();
  const Eigen::VectorXd& s = state.values();
  const double total = closed_form_ ? diagonal_.sum() : second_moment_.trace();
  double explicit_part = 0.0;
  double captured = 0.0;
  for (Index j = 0; j < u.cols(); ++j) {
    const double q = closed_form_ ? (u.col(j).array().square() * diagonal_.array()).sum()
                                  : u.col(j).dot(second_moment_ * u.col(j));
    explicit_part += s[j] * q;
    captured += q;
  }
  return explicit_part + state.complement() * (total - captured);
}

double population_suboptimality(const EigenState& state, const ObjectiveOracle& oracle, Index k) {
  if (k < 1 || k > oracle.dim()) throw Infeasible("suboptimality: k must lie in [1, d]");
  if (state.dim() != oracle.dim()) throw DimensionMismatch("suboptimality: dimension mismatch");
  // Directions tied with the complement eigenvalue have no preferred basis;
  // when the top-k cut falls inside that block, the projector is replaced by
  // its average over the tied eigenspace.
  const Index d = state.dim();
  const Index m = state.columns();
  const Eigen::VectorXd& values = state.values();
  const double c = state.complement();
  std::vector<Index> above, tied, below;
  for (Index j = 0; j < m; ++j) {
    if (values[j] > c + kMergeTolerance) {
      above.push_back(j);
    } else if (values[j] >= c - kMergeTolerance) {
      tied.push_back(j);
    } else {
      below.push_back(j);
    }
  }
  const Index block = static_cast<Index>(tied.size()) + (d - m);
  const Index n_above = static_cast<Index>(above.size());
  if (k <= n_above || block == 0) return oracle.optimum(k) - oracle.objective(top_directions(state, k));

  const Index from_block = std::min(k - n_above, block);
  const Index from_below = k - n_above - from_block;
  Eigen::MatrixXd chosen(d, n_above + from_below);
  for (Index j = 0; j < n_above; ++j) chosen.col(j) = state.basis().col(above[j]);
  for (Index j = 0; j < from_below; ++j) chosen.col(n_above + j) = state.basis().col(below[j]);
  Eigen::MatrixXd tied_basis(d, static_cast<Index>(tied.size()));
  for (std::size_t j = 0; j < tied.size(); ++j) {
    tied_basis.col(static_cast<Index>(j)) = state.basis().col(tied[j]);
  }
  double block_objective = oracle.objective(tied_basis);
  if (d > m) {
    block_objective += oracle.objective(EigenState(d, 1.0)) - oracle.objective(state.basis());
  }
  const double objective = oracle.objective(chosen) +
                           static_cast<double>(from_block) / static_cast<double>(block) *
                               block_objective;
  return oracle.optimum(k) - objective;
}

double empirical_objective(const EigenState& state, const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0) throw DimensionMismatch("empirical_objective: empty sample set");
  if (samples.cols() != state.dim()) {
    throw DimensionMismatch("empirical_objective: sample dimension mismatch");
  }
  const Eigen::MatrixXd proj = samples * state.basis();  // n x m
  const Eigen::VectorXd coeff = proj.array().square().colwise().sum().transpose();
  double value = coeff.dot(state.values());
  if (state.complement() != 0.0) {
    value += state.complement() * (samples.squaredNorm() - coeff.sum());
  }
  return value / static_cast<double>(samples.rows());
}

double empirical_objective(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0) throw DimensionMismatch("empirical_objective: empty sample set");
  if (samples.cols() != basis.rows()) {
    throw DimensionMismatch("empirical_objective: sample dimension mismatch");
  }
  return (samples * basis).squaredNorm() / static_cast<double>(samples.rows());
}

std::vector<double> runtime_proxy(const std::vector<Index>& ranks) {
  std::vector<double> out;
  out.reserve(ranks.size());
  double total = 0.0;
  for (Index r : ranks) {
    total += static_cast<double>(r) * static_cast<double>(r);
    out.push_back(total);
  }
  return out;
}

std::vector<double> runtime_proxy(const RunTrace& trace) {
  std::vector<Index> ranks;
  ranks.reserve(trace.records.size());
  for (const auto& r : trace.records) ranks.push_back(r.rank);
  return runtime_proxy(ranks);
}

std::vector<double> default_step_grid() {
  std::vector<double> grid;
  for (int e = -12; e <= 5; ++e) grid.push_back(std::ldexp(1.0, e));
  return grid;
}

GridResult grid_search(const SolverConfig& base, const std::vector<double>& grid,
                       const Sampler& train, const ObjectiveOracle& validation,
                       unsigned threads) {
  if (grid.empty()) throw InvalidConfig("grid_search: empty grid");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  GridResult out;
  out.points.resize(sorted.size());
  parallel_for(sorted.size(), threads, [&](std::size_t i) {
    SolverConfig cfg = base;
    cfg.c = sorted[i];
    cfg.averaging = false;
    cfg.rounding = false;
    auto stream = train.clone(base.seed);
    std::vector<double> scores;
    const RunTrace trace = run(cfg, *stream, [&](const EigenState& s) {
      const double v = population_suboptimality(s, validation, cfg.k);
      scores.push_back(v);
      return v;
    });
    out.points[i] = {sorted[i], scores.empty() ? 0.0 : mean_of(scores)};
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    if (out.points[i].score < out.points[best].score - 1e-12) best = i;
  }
  out.best_c = out.points[best].c;
  return out;
}

// --- experiment spec --------------------------------------------------------

void ExperimentSpec::validate() const {
  if (name.empty()) throw SpecError("name must not be empty");
  if (k < 1) throw SpecError("k must be at least 1");
  if (iterations < 0) throw SpecError("iterations must be nonnegative");
  if (iterations == 0 && sampler.kind != SourceKind::kIdx) {
    throw SpecError("iterations must be positive for synthetic samplers");
  }
  if (seeds.empty()) throw SpecError("at least one seed is required");
  if (algorithms.empty()) throw SpecError("at least one algorithm is required");
  if (output.empty()) throw SpecError("output must not be empty");
  if (sampler.kind == SourceKind::kOrthogonal) {
    if (sampler.dim < 1) throw SpecError("sampler.d must be positive");
    if (!(sampler.tau > 0.0)) throw SpecError("sampler.tau must be positive");
  }
  if (sampler.kind == SourceKind::kIdx && sampler.images.empty()) {
    throw SpecError("sampler.images is required for idx data");
  }
  const Index d = sampler.kind == SourceKind::kTrap ? 2 : sampler.dim;
  if (sampler.kind != SourceKind::kIdx && k > d) throw SpecError("k exceeds the dimension");
  std::set<std::string> labels;
  bool tuning = false;
  for (const auto& a : algorithms) {
    if (a.label.empty()) throw SpecError("algorithm labels must not be empty");
    if (a.label.find_first_of("/\\,\"") != std::string::npos) {
      throw SpecError("algorithm label '" + a.label + "' contains a reserved character");
    }
    if (!labels.insert(a.label).second) throw SpecError("duplicate algorithm label " + a.label);
    if (!(a.c > 0.0)) throw SpecError(a.label + ": c must be positive");
    if (a.rank_cap != 0 && a.rank_cap < k) throw SpecError(a.label + ": K must be at least k");
    tuning = tuning || a.tune;
  }
  if (tuning && grid.empty()) throw SpecError("tuning requested with an empty grid");
  for (double c : grid) {
    if (!(c > 0.0) || !std::isfinite(c)) throw SpecError("grid entries must be positive");
  }
}

ExperimentSpec parse_experiment_spec(const std::string& text,
                                     const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw SpecError(std::string("spec is not valid YAML: ") + e.what());
  }
  check_keys(root, "spec",
             {"name", "sampler", "k", "iterations", "seeds", "grid", "algorithms", "output",
              "write_traces", "threads"});

  ExperimentSpec spec;
  spec.name = get<std::string>(root, "name", "spec", spec.name);
  spec.k = get<Index>(root, "k", "spec", spec.k);
  spec.iterations = get<Index>(root, "iterations", "spec", spec.iterations);
  spec.write_traces = get<bool>(root, "write_traces", "spec", spec.write_traces);
  spec.threads = get<unsigned>(root, "threads", "spec", spec.threads);
  spec.output = get<std::string>(root, "output", "spec", spec.output.string());

  const YAML::Node sampler = root["sampler"];
  if (!sampler) throw SpecError("spec: missing sampler table");
  check_keys(sampler, "sampler", {"kind", "d", "tau", "images", "normalize"});
  const auto kind = get<std::string>(sampler, "kind", "sampler", "");
  if (kind == "orthogonal") {
    spec.sampler.kind = SourceKind::kOrthogonal;
  } else if (kind == "trap") {
    spec.sampler.kind = SourceKind::kTrap;
    spec.sampler.dim = 2;
  } else if (kind == "idx") {
    spec.sampler.kind = SourceKind::kIdx;
  } else {
    throw SpecError("sampler.kind must be orthogonal, trap or idx");
  }
  if (spec.sampler.kind == SourceKind::kOrthogonal) {
    spec.sampler.dim = get<Index>(sampler, "d", "sampler", spec.sampler.dim);
    spec.sampler.tau = get<double>(sampler, "tau", "sampler", spec.sampler.tau);
  }
  if (spec.sampler.kind == SourceKind::kIdx) {
    std::filesystem::path images = get<std::string>(sampler, "images", "sampler", "");
    if (!images.empty() && images.is_relative() && !base_dir.empty()) images = base_dir / images;
    spec.sampler.images = images;
    spec.sampler.normalize = get<bool>(sampler, "normalize", "sampler", true);
  }

  if (root["seeds"]) spec.seeds = parse_seeds(root["seeds"]);
  if (root["grid"]) spec.grid = parse_grid(root["grid"]);

  const YAML::Node algorithms = root["algorithms"];
  if (!algorithms || !algorithms.IsSequence()) throw SpecError("spec: algorithms must be a list");
  for (const auto& node : algorithms) {
    check_keys(node, "algorithms",
               {"label", "algorithm", "K", "schedule", "c", "tune", "averaging", "rounding"});
    AlgorithmSpec a;
    const auto name = get<std::string>(node, "algorithm", "algorithms", "");
    try {
      a.algorithm = parse_algorithm(name);
      a.schedule = parse_schedule(get<std::string>(node, "schedule", "algorithms", "decaying"));
    } catch (const InvalidConfig& e) {
      throw SpecError(e.what());
    }
    a.label = get<std::string>(node, "label", "algorithms", std::string(to_string(a.algorithm)));
    a.rank_cap = get<Index>(node, "K", "algorithms", 0);
    a.c = get<double>(node, "c", "algorithms", 1.0);
    a.tune = get<bool>(node, "tune", "algorithms", false);
    a.averaging = get<bool>(node, "averaging", "algorithms", false);
    a.rounding = get<bool>(node, "rounding", "algorithms", false);
    spec.algorithms.push_back(std::move(a));
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot read spec file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_spec(buffer.str(), path.parent_path());
}

// --- experiments ------------------------------------------------------------

std::string trace_csv(const RunTrace& trace) {
  std::string out = "t,rank,suboptimality,runtime_proxy,eigenvalues,complement\n";
  for (const auto& r : trace.records) {
    fmt::format_to(std::back_inserter(out), "{},{},", r.t, r.rank);
    if (r.suboptimality) fmt::format_to(std::back_inserter(out), "{}", *r.suboptimality);
    fmt::format_to(std::back_inserter(out), ",{},\"", r.runtime_proxy);
    for (std::size_t j = 0; j < r.eigenvalues.size(); ++j) {
      if (j > 0) out.push_back(';');
      fmt::format_to(std::back_inserter(out), "{}", r.eigenvalues[j]);
    }
    fmt::format_to(std::back_inserter(out), "\",{}\n", r.complement);
  }
  return out;
}

std::map<std::string, GridResult> grid_search(const ExperimentSpec& spec) {
  spec.validate();
  const ContextFactory factory(spec);
  std::map<std::string, GridResult> out;
  const std::uint64_t seed = spec.seeds.front();
  for (const auto& algo : spec.algorithms) {
    if (!algo.tune) {
      out[algo.label] = GridResult{algo.c, {{algo.c, 0.0}}};
      continue;
    }
    const SeedContext ctx = factory.make(seed);
    const SolverConfig base =
        make_config(spec, algo, factory.dim(), ctx.iterations, seed, algo.c);
    out[algo.label] = grid_search(base, spec.grid, *ctx.train, *ctx.validation, spec.threads);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const ContextFactory factory(spec);
  const Index d = factory.dim();
  if (spec.k > d) throw SpecError("k exceeds the data dimension");

  std::map<std::string, GridResult> tuned;
  bool any_tuning = false;
  for (const auto& a : spec.algorithms) any_tuning = any_tuning || a.tune;
  if (any_tuning) tuned = grid_search(spec);

  std::vector<double> constants;
  for (const auto& a : spec.algorithms) constants.push_back(a.tune ? tuned.at(a.label).best_c : a.c);

  const std::size_t n_seeds = spec.seeds.size();
  const std::size_t n_algos = spec.algorithms.size();
  std::vector<CellResult> cells(n_seeds * n_algos);
  std::vector<std::uint8_t> consistent(n_seeds, 1);

  // One task per seed: the per-seed data context is built once and shared by
  // every algorithm, each of which replays the same seeded stream.
  parallel_for(n_seeds, spec.threads, [&](std::size_t s) {
    const std::uint64_t seed = spec.seeds[s];
    const SeedContext ctx = factory.make(seed);
    for (std::size_t a = 0; a < n_algos; ++a) {
      const AlgorithmSpec& algo = spec.algorithms[a];
      const SolverConfig cfg = make_config(spec, algo, d, ctx.iterations, seed, constants[a]);
      CellResult& cell = cells[s * n_algos + a];
      auto stream = ctx.train->clone(seed);
      cell.trace = run(cfg, *stream, [&](const EigenState& state) {
        cell.e1.push_back(top_direction_is_e1(state));
        const double v = population_suboptimality(state, *ctx.test, spec.k);
        cell.suboptimality.push_back(v);
        return v;
      });
      for (const auto& r : cell.trace.records) {
        if (r.suboptimality) cell.checkpoint_t.push_back(r.t);
      }
      if (cell.trace.rounded_basis) {
        cell.rounded_suboptimality =
            ctx.test->optimum(spec.k) - ctx.test->objective(*cell.trace.rounded_basis);
      }
      if (cell.trace.stream_checksum != cells[s * n_algos].trace.stream_checksum) {
        consistent[s] = 0;
      }
    }
  });

  ExperimentResult result;
  result.identical_streams =
      std::all_of(consistent.begin(), consistent.end(), [](std::uint8_t c) { return c != 0; });

  std::filesystem::create_directories(spec.output);
  if (spec.write_traces) {
    const auto dir = spec.output / "traces";
    std::filesystem::create_directories(dir);
    for (std::size_t s = 0; s < n_seeds; ++s) {
      for (std::size_t a = 0; a < n_algos; ++a) {
        const auto path =
            dir / fmt::format("{}_seed{}.csv", spec.algorithms[a].label, spec.seeds[s]);
        write_file(path, trace_csv(cells[s * n_algos + a].trace));
        result.trace_files.push_back(path);
      }
    }
  }

  std::string aggregate =
      "algorithm,c,t,seeds,mean_suboptimality,se_suboptimality,mean_rank,mean_runtime_proxy,"
      "top_e1_fraction,mean_rounded_suboptimality,se_rounded_suboptimality\n";
  for (std::size_t a = 0; a < n_algos; ++a) {
    AlgorithmSummary summary;
    summary.label = spec.algorithms[a].label;
    summary.c = constants[a];
    summary.seeds = n_seeds;
    if (spec.algorithms[a].tune) summary.tuning = tuned.at(summary.label);

    const std::vector<Index>& ts = cells[a].checkpoint_t;
    std::vector<double> rounded;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const auto& cell = cells[s * n_algos + a];
      if (cell.rounded_suboptimality) rounded.push_back(*cell.rounded_suboptimality);
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
      std::vector<double> sub, rank, proxy;
      double e1 = 0.0;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const auto& cell = cells[s * n_algos + a];
        const auto& record = cell.trace.records[static_cast<std::size_t>(ts[i] - 1)];
        sub.push_back(cell.suboptimality[i]);
        rank.push_back(static_cast<double>(record.rank));
        proxy.push_back(record.runtime_proxy);
        e1 += cell.e1[i] ? 1.0 : 0.0;
      }
      CheckpointStats stats;
      stats.t = ts[i];
      stats.mean_suboptimality = mean_of(sub);
      stats.se_suboptimality = standard_error(sub);
      stats.mean_rank = mean_of(rank);
      stats.mean_runtime_proxy = mean_of(proxy);
      stats.top_e1_fraction = e1 / static_cast<double>(n_seeds);
      summary.checkpoints.push_back(stats);

      fmt::format_to(std::back_inserter(aggregate), "{},{},{},{},{},{},{},{},{},", summary.label,
                     summary.c, stats.t, n_seeds, stats.mean_suboptimality,
                     stats.se_suboptimality, stats.mean_rank, stats.mean_runtime_proxy,
                     stats.top_e1_fraction);
      if (i + 1 == ts.size() && !rounded.empty()) {
        fmt::format_to(std::back_inserter(aggregate), "{},{}", mean_of(rounded),
                       standard_error(rounded));
      } else {
        aggregate.push_back(',');
      }
      aggregate.push_back('\n');
    }
    if (!rounded.empty()) {
      summary.mean_rounded_suboptimality = mean_of(rounded);
      summary.se_rounded_suboptimality = standard_error(rounded);
    }
    result.algorithms.push_back(std::move(summary));
  }
  result.aggregate_file = spec.output / "aggregate.csv";
  write_file(result.aggregate_file, aggregate);

  if (any_tuning) {
    std::string tuning = "algorithm,c,score,selected\n";
    for (const auto& s : result.algorithms) {
      if (!s.tuning) continue;
      for (const auto& p : s.tuning->points) {
        fmt::format_to(std::back_inserter(tuning), "{},{},{},{}\n", s.label, p.c, p.score,
                       p.c == s.tuning->best_c ? 1 : 0);
      }
    }
    write_file(spec.output / "tuning.csv", tuning);
  }

  result.plot_script = spec.output / "plot.py";
  write_file(result.plot_script, plot_script(spec));
  return result;
}

}  // namespace msgpca
