#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "msgpca/data.hpp"
#include "msgpca/error.hpp"
#include "msgpca/harness.hpp"
#include "msgpca/projection.hpp"
#include "msgpca/rounding.hpp"
#include "msgpca/solvers.hpp"

namespace msgpca::cli {
namespace {

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += fmt::format("{}{:.12g}", i ? "," : "", v[i]);
  return s;
}

EigenState diagonal_state(const std::vector<double>& values, Index dim) {
  const auto n = static_cast<Index>(values.size());
  if (dim == 0) dim = n;
  if (n == 0) throw InvalidConfig("--values must list at least one eigenvalue");
  if (dim < n) throw InvalidConfig("--d must be at least the number of values");
  return EigenState(Eigen::MatrixXd::Identity(dim, n),
                    Eigen::Map<const Eigen::VectorXd>(values.data(), n));
}

// Training stream and an oracle for `run`.
struct RunSource {
  std::unique_ptr<Sampler> stream;
  std::optional<ObjectiveOracle> oracle;
};

RunSource make_source(const RunOptions& o) {
  RunSource src;
  if (o.dist == "orthogonal") {
    auto dist = std::make_unique<OrthogonalDistribution>(o.dim, o.tau, o.seed);
    src.oracle = ObjectiveOracle::closed_form(dist->second_moments());
    src.stream = std::move(dist);
  } else if (o.dist == "trap") {
    src.stream = std::make_unique<TrapDistribution>(o.seed);
    src.oracle = ObjectiveOracle::closed_form(TrapDistribution::second_moments());
  } else {
    if (o.data.empty()) throw InvalidConfig("--dist idx requires --data <file>");
    auto data = std::make_shared<DatasetSource>(load_dataset(o.data));
    if (data->size() < 5) throw DataError("data set needs at least 5 samples");
    data->split = split(data->size(), o.seed);
    *data = normalize(*data);
    const Split& s = *data->split;
    if (o.iterations > static_cast<Index>(s.train.size())) {
      throw InvalidConfig(fmt::format("--T {} exceeds the {} training samples", o.iterations,
                                      s.train.size()));
    }
    src.oracle = ObjectiveOracle::empirical(data->gather(s.test));
    src.stream = std::make_unique<DatasetSampler>(data, s.train, o.seed);
  }
  return src;
}

int cmd_run(const RunOptions& o, int verbosity, std::ostream& out) {
  RunSource src = make_source(o);
  SolverConfig cfg;
  cfg.algorithm = parse_algorithm(o.algo);
  cfg.schedule = parse_schedule(o.schedule);
  cfg.dim = src.stream->dim();
  cfg.k = o.k;
  cfg.rank_cap = o.rank_cap;
  cfg.iterations = o.iterations;
  cfg.c = o.c;
  cfg.seed = o.seed;
  cfg.averaging = o.averaging;
  cfg.rounding = o.rounding;
  cfg.validate();

  const ObjectiveOracle& oracle = *src.oracle;
  const RunTrace trace = run(cfg, *src.stream, [&](const EigenState& s) {
    return population_suboptimality(s, oracle, cfg.k);
  });

  std::ofstream file(o.output, std::ios::binary);
  if (!file) throw DataError("cannot write " + o.output);
  file << trace_csv(trace);
  if (!file) throw DataError("failed writing " + o.output);
  if (verbosity > 0) fmt::print(out, "wrote {} rows to {}\n", trace.records.size(), o.output);

  const EigenState& last = trace.final_state;
  fmt::print(out, "algorithm: {}\n", to_string(cfg.algorithm));
  fmt::print(out, "iterations: {}\n", cfg.iterations);
  fmt::print(out, "final rank: {}\n", last.rank());
  fmt::print(out, "final suboptimality: {:.6g}\n", population_suboptimality(last, oracle, cfg.k));
  if (trace.rounded_basis) {
    const double rounded = oracle.optimum(cfg.k) - oracle.objective(*trace.rounded_basis);
    fmt::print(out, "rounded suboptimality: {:.6g}\n", rounded);
  }
  if (cfg.dim >= 2) {
    const Eigen::VectorXd top = top_directions(last, 1).col(0);
    const double a1 = std::abs(top[0]);
    const double a2 = std::abs(top[1]);
    fmt::print(out, "top direction: |<u,e1>| = {:.6f}, |<u,e2>| = {:.6f} ({}-aligned)\n", a1, a2,
               a1 >= a2 ? "e1" : "e2");
  }
  return kExitOk;
}

int cmd_experiment(const ExperimentOptions& o, int verbosity, std::ostream& out) {
  ExperimentSpec spec = load_experiment_spec(o.spec);
  if (!o.output.empty()) spec.output = o.output;
  if (o.threads != 0) spec.threads = o.threads;
  const ExperimentResult r = run_experiment(spec);
  for (const auto& a : r.algorithms) {
    const CheckpointStats& f = a.final();
    fmt::print(out,
               "{}: c={:g} T={} seeds={} suboptimality={:.6g} +- {:.2g} rank={:.3g} "
               "runtime_proxy={:.6g} e1_fraction={:.4f}",
               a.label, a.c, f.t, a.seeds, f.mean_suboptimality, f.se_suboptimality, f.mean_rank,
               f.mean_runtime_proxy, f.top_e1_fraction);
    if (a.mean_rounded_suboptimality) {
      fmt::print(out, " rounded={:.6g} +- {:.2g}", *a.mean_rounded_suboptimality,
                 a.se_rounded_suboptimality.value_or(0.0));
    }
    fmt::print(out, "\n");
  }
  if (!r.identical_streams) fmt::print(out, "warning: algorithms saw different sample streams\n");
  fmt::print(out, "output: {}\n", r.aggregate_file.parent_path().string());
  if (verbosity > 0) {
    for (const auto& p : r.trace_files) fmt::print(out, "  {}\n", p.string());
  }
  return kExitOk;
}

int cmd_project(const ProjectOptions& o, std::ostream& out) {
  const EigenState state = diagonal_state(o.values, o.dim);
  EigenState projected(1);
  if (o.kind == "simplex") {
    projected = project_capped_simplex(state, o.k);
  } else if (o.kind == "rank") {
    if (o.rank_cap < o.k) throw InvalidConfig("--kind rank needs --K >= --k");
    projected = project_capped_rank(state, o.k, o.rank_cap);
  } else if (o.kind == "entropic") {
    projected = project_entropic(state, o.k);
  } else {
    throw InvalidConfig("--kind must be simplex, rank or entropic");
  }
  // Eigenvalues listed in the coordinate order of the input.
  const Eigen::MatrixXd m = reconstruct(projected);
  fmt::print(out, "eigenvalues: {}\n", join(m.diagonal()));
  fmt::print(out, "trace: {:.12g}\n", projected.trace());
  fmt::print(out, "rank: {}\n", projected.rank());
  return kExitOk;
}

int cmd_round(const RoundOptions& o, std::ostream& out) {
  const EigenState state = diagonal_state(o.values, 0);
  std::mt19937_64 rng(o.seed);
  const Rounding r = round_to_rank_k(state, o.k, rng);
  std::size_t drawn = 0;
  for (std::size_t i = 0; i < r.mixture.components.size(); ++i) {
    const auto& c = r.mixture.components[i];
    std::string coords;
    for (Index j = 0; j < c.basis.cols(); ++j) {
      Index arg = 0;
      c.basis.col(j).cwiseAbs().maxCoeff(&arg);
      coords += fmt::format("{}e{}", j ? "," : "", arg + 1);
    }
    fmt::print(out, "component {}: weight={:.12g} span={{{}}}\n", i, c.weight, coords);
    if (c.basis == r.sample) drawn = i;
  }
  fmt::print(out, "sampled component: {}\n", drawn);
  return kExitOk;
}

int cmd_ingest(const IngestOptions& o, std::ostream& out) {
  DatasetSource data = load_dataset(o.input);
  if (o.normalize) {
    if (data.size() < 5) throw DataError("normalization needs at least 5 samples");
    data.split = split(data.size(), o.seed);
    data = normalize(data);
  }
  write_cache(o.output, data);
  fmt::print(out, "{} samples x {} features -> {}\n", data.size(), data.dim(), o.output);
  return kExitOk;
}

}  // namespace

Cli::Cli() : app_(std::make_unique<CLI::App>("Stochastic optimization for streaming PCA", "msgpca")) {
  CLI::App& app = *app_;
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("-v,--verbose", verbosity_, "Print extra progress information (repeatable)");

  auto* run = app.add_subcommand("run", "Run one solver and write its per-iteration trace CSV");
  run->add_option("--algo", run_.algo, "Algorithm")
      ->check(CLI::IsMember({"msg", "capped", "capped-msg", "incremental", "meg", "power"}));
  run->add_option("--dist", run_.dist, "Sample source")
      ->check(CLI::IsMember({"orthogonal", "trap", "idx"}));
  run->add_option("--data", run_.data, "IDX or cache file for --dist idx")
      ->default_str("none");
  run->add_option("--d", run_.dim, "Dimension of the orthogonal distribution")
      ->check(CLI::PositiveNumber);
  run->add_option("--tau", run_.tau, "Eigenvalue decay of the orthogonal distribution")
      ->check(CLI::PositiveNumber);
  run->add_option("--k", run_.k, "Target subspace dimension")->required()->default_str("");
  run->add_option("--K", run_.rank_cap, "Rank cap for capped MSG (0 = k + 1)");
  run->add_option("--T", run_.iterations, "Number of iterations")->required()->default_str("");
  run->add_option("--schedule", run_.schedule, "Step-size schedule")
      ->check(CLI::IsMember({"fixed", "decaying"}));
  run->add_option("--c", run_.c, "Step-size constant")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_.seed, "Random seed");
  run->add_flag("--averaging", run_.averaging, "Track the running average of the iterates [default: off]");
  run->add_flag("--rounding", run_.rounding, "Round the final iterate to a rank-k subspace [default: off]");
  run->add_option("-o,--output", run_.output, "Trace CSV path");

  auto* exp = app.add_subcommand("experiment", "Run a Monte-Carlo experiment from a spec file");
  exp->add_option("spec", experiment_.spec, "Experiment spec (YAML)")->required()->default_str("");
  exp->add_option("-o,--output", experiment_.output, "Output directory (overrides the spec)")
      ->default_str("spec value");
  exp->add_option("--threads", experiment_.threads, "Worker threads (0 = spec value)");

  auto* proj = app.add_subcommand("project", "Project a diagonal spectrum onto a constraint set");
  proj->add_option("--values", project_.values, "Eigenvalues, comma separated")
      ->required()->default_str("")
      ->delimiter(',');
  proj->add_option("--k", project_.k, "Trace target")->required()->default_str("");
  proj->add_option("--K", project_.rank_cap, "Rank cap for --kind rank");
  proj->add_option("--d", project_.dim, "Dimension; missing values are zero (0 = count of values)");
  proj->add_option("--kind", project_.kind, "Constraint set")
      ->check(CLI::IsMember({"simplex", "rank", "entropic"}));

  auto* round = app.add_subcommand("round", "Decompose a diagonal spectrum into rank-k projectors");
  round->add_option("--values", round_.values, "Eigenvalues, comma separated")
      ->required()->default_str("")
      ->delimiter(',');
  round->add_option("--k", round_.k, "Subspace dimension")->required()->default_str("");
  round->add_option("--seed", round_.seed, "Random seed for the sampled component");

  auto* ingest = app.add_subcommand("ingest", "Convert an IDX file into the binary sample cache");
  ingest->add_option("input", ingest_.input, "IDX file")->required()->default_str("");
  ingest->add_option("-o,--output", ingest_.output, "Cache file")->required()->default_str("");
  ingest->add_flag("--normalize", ingest_.normalize, "Center and scale with train-split statistics [default: off]");
  ingest->add_option("--seed", ingest_.seed, "Split seed used with --normalize");

  auto* self = app.add_subcommand("selftest", "Check the numerical kernels against reference oracles");
  self->add_option("--instances", selftest_.instances, "Random instances per suite")
      ->check(CLI::PositiveNumber);
  self->add_option("--seed", selftest_.seed, "Random seed");
  self->add_flag("--mutate-projection", selftest_.mutate_projection)->group("");
}

Cli::~Cli() = default;

int Cli::run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app_->parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app_->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app_->help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "msgpca 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "Run with --help for usage.\n";
    return kExitUsage;
  }
  return dispatch(out, err);
}

int Cli::dispatch(std::ostream& out, std::ostream& err) {
  try {
    if (app_->got_subcommand("run")) return cmd_run(run_, verbosity_, out);
    if (app_->got_subcommand("experiment")) return cmd_experiment(experiment_, verbosity_, out);
    if (app_->got_subcommand("project")) return cmd_project(project_, out);
    if (app_->got_subcommand("round")) return cmd_round(round_, out);
    if (app_->got_subcommand("ingest")) return cmd_ingest(ingest_, out);
    if (app_->got_subcommand("selftest")) return run_selftest(selftest_, out);
  } catch (const SpecError& e) {
    err << "spec error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidConfig& e) {
    err << "invalid arguments: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Infeasible& e) {
    err << "infeasible input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace msgpca::cli
