#include "msgpca/solvers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <string>

#include "msgpca/error.hpp"
#include "msgpca/projection.hpp"

namespace msgpca {
namespace {

constexpr std::uint64_t kRoundingSeedSalt = 0x9E3779B97F4A7C15ULL;

EigenState exp_spectrum(const EigenState& log_state) {
  Eigen::VectorXd values = log_state.values().array().exp();
  return EigenState(log_state.basis(), std::move(values), std::exp(log_state.complement()),
                    EigenState::Check::kNone);
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kMsg:
      return "msg";
    case Algorithm::kCappedMsg:
      return "capped";
    case Algorithm::kIncremental:
      return "incremental";
    case Algorithm::kMeg:
      return "meg";
    case Algorithm::kStochasticPower:
      return "power";
  }
  return "unknown";
}

std::string_view to_string(Schedule schedule) {
  return schedule == Schedule::kFixed ? "fixed" : "decaying";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "msg") return Algorithm::kMsg;
  if (name == "capped" || name == "capped-msg" || name == "capped_msg") {
    return Algorithm::kCappedMsg;
  }
  if (name == "incremental") return Algorithm::kIncremental;
  if (name == "meg") return Algorithm::kMeg;
  if (name == "power" || name == "stochastic-power") return Algorithm::kStochasticPower;
  throw InvalidConfig("unknown algorithm '" + std::string(name) +
                      "' (expected msg, capped, incremental, meg or power)");
}

Schedule parse_schedule(std::string_view name) {
  if (name == "fixed") return Schedule::kFixed;
  if (name == "decaying") return Schedule::kDecaying;
  throw InvalidConfig("unknown schedule '" + std::string(name) + "' (expected fixed or decaying)");
}

Index SolverConfig::effective_rank_cap() const {
  return rank_cap > 0 ? rank_cap : std::min(k + 1, dim);
}

void SolverConfig::validate() const {
  if (dim <= 0) throw InvalidConfig("dimension must be positive");
  if (k < 1 || k > dim) {
    throw InvalidConfig("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(dim) +
                        "]");
  }
  if (algorithm == Algorithm::kCappedMsg) {
    const Index cap = effective_rank_cap();
    if (cap < k) {
      throw InvalidConfig("rank cap K = " + std::to_string(cap) + " must be at least k = " +
                          std::to_string(k));
    }
  }
  if (iterations < 0) throw InvalidConfig("iteration count must be nonnegative");
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidConfig("step constant c must be > 0");
}

double SolverConfig::step_size(Index t) const {
  if (schedule == Schedule::kFixed) {
    return c * std::sqrt(static_cast<double>(k) / static_cast<double>(std::max<Index>(iterations, 1)));
  }
  return c / std::sqrt(static_cast<double>(std::max<Index>(t, 1)));
}

EigenState msg_step(const EigenState& state, const Sample& x, double eta, Index k) {
  return project_capped_simplex(rank1_update(state, x, eta), k);
}

EigenState capped_msg_step(const EigenState& state, const Sample& x, double eta, Index k,
                           Index rank_cap) {
  return project_capped_rank(rank1_update(state, x, eta), k, rank_cap);
}

EigenState incremental_step(const EigenState& state, const Sample& x, Index k) {
  if (k < 1 || k > state.dim()) throw Infeasible("incremental_step: k must lie in [1, d]");
  const EigenState updated = rank1_update(state, x, 1.0);
  const Index m = updated.columns();
  const Eigen::VectorXd& values = updated.values();
  if (m <= k && updated.complement() == 0.0) return updated;

  std::vector<Index> keep;
  const double cut = values[k - 1];
  for (Index j = 0; j < m && values[j] > cut + kMergeTolerance; ++j) keep.push_back(j);
  std::vector<Index> tied;
  for (Index j = static_cast<Index>(keep.size()); j < m && values[j] >= cut - kMergeTolerance;
       ++j) {
    tied.push_back(j);
  }
  const auto need = static_cast<std::size_t>(k) - keep.size();
  if (tied.size() > need && state.columns() > 0) {
    const Eigen::VectorXd overlap =
        (state.basis().transpose() * updated.basis()).colwise().squaredNorm().transpose();
    std::stable_sort(tied.begin(), tied.end(),
                     [&](Index a, Index b) { return overlap[a] > overlap[b]; });
  }
  tied.resize(std::min(tied.size(), need));
  keep.insert(keep.end(), tied.begin(), tied.end());
  std::sort(keep.begin(), keep.end());

  Eigen::VectorXd kept(static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) kept[static_cast<Index>(j)] = values[keep[j]];
  return select_columns(updated, keep, kept, 0.0);
}

MegState MegState::maximum_entropy(Index dim, Index k) {
  if (dim <= 0 || k < 1 || k > dim) throw InvalidConfig("MegState: k must lie in [1, d]");
  return MegState(EigenState(dim, std::log(static_cast<double>(k) / static_cast<double>(dim))));
}

MegState MegState::from_spectrum(const EigenState& spectrum) {
  if ((spectrum.values().array() <= 0.0).any() ||
      (spectrum.complement_multiplicity() > 0 && spectrum.complement() <= 0.0)) {
    throw DegenerateState("MEG requires a strictly positive definite state");
  }
  Eigen::VectorXd logs = spectrum.values().array().log();
  const double complement =
      spectrum.complement_multiplicity() > 0 ? std::log(spectrum.complement()) : 0.0;
  return MegState(EigenState(spectrum.basis(), std::move(logs), complement,
                             EigenState::Check::kNone));
}

EigenState MegState::spectrum() const { return exp_spectrum(log_); }

MegState meg_step(const MegState& state, const Sample& x, double eta, Index k) {
  return MegState(project_entropic_log(rank1_update(state.log_, x, eta), k));
}

Eigen::MatrixXd power_step(const Eigen::MatrixXd& basis, const Sample& x, double eta) {
  if (x.size() != basis.rows()) throw DimensionMismatch("power_step: sample dimension mismatch");
  if (!x.allFinite()) throw NonFiniteInput("power_step: non-finite sample");
  Eigen::MatrixXd moved = basis;
  moved.noalias() += (eta * x) * (x.transpose() * basis);

  const Index d = basis.rows();
  const Index k = basis.cols();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(moved);
  const Eigen::VectorXd diag = qr.matrixQR().diagonal().head(k);
  const double scale = std::max(1.0, diag.cwiseAbs().maxCoeff());
  if ((diag.cwiseAbs().array() <= 1e-12 * scale).any()) {
    throw DegenerateState("power_step: columns became linearly dependent");
  }
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  // Fix signs so that R has a positive diagonal.
  for (Index j = 0; j < k; ++j) {
    if (diag[j] < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Eigen::MatrixXd random_orthonormal(Index dim, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(dim, k);
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < dim; ++i) g(i, j) = normal(rng);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(dim, k);
}

bool is_checkpoint(Index t, Index iterations) {
  return t == iterations || (t > 0 && std::has_single_bit(static_cast<std::uint64_t>(t)));
}

std::uint64_t checksum(const Sample& x, std::uint64_t seed) {
  std::uint64_t h = seed == 0 ? 0xcbf29ce484222325ULL : seed;
  const auto* bytes = reinterpret_cast<const unsigned char*>(x.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunTrace run(const SolverConfig& config, Sampler& stream, const Evaluator& evaluator) {
  config.validate();
  if (stream.dim() != config.dim) {
    throw DimensionMismatch("run: stream dimension " + std::to_string(stream.dim()) +
                            " differs from configured d = " + std::to_string(config.dim));
  }
  const Index d = config.dim;
  const Index k = config.k;
  const Index rank_cap = config.effective_rank_cap();

  EigenState state(d);
  std::optional<MegState> meg;
  Eigen::MatrixXd power;
  if (config.algorithm == Algorithm::kMeg) {
    meg = MegState::maximum_entropy(d, k);
    state = meg->spectrum();
  } else if (config.algorithm == Algorithm::kStochasticPower) {
    power = random_orthonormal(d, k, config.seed);
    state = EigenState(power, Eigen::VectorXd::Ones(k), 0.0, EigenState::Check::kNone);
  }

  RunTrace trace;
  trace.records.reserve(static_cast<std::size_t>(config.iterations));
  const bool dense_average = config.averaging && d <= config.dense_average_limit;
  trace.averaging_supported = !config.averaging || dense_average;
  Eigen::MatrixXd average_sum;
  if (dense_average) average_sum = Eigen::MatrixXd::Zero(d, d);

  double proxy = 0.0;
  for (Index t = 1; t <= config.iterations; ++t) {
    const Sample x = stream.next();
    trace.stream_checksum = checksum(x, trace.stream_checksum);
    const double eta = config.step_size(t);
    switch (config.algorithm) {
      case Algorithm::kMsg:
        state = msg_step(state, x, eta, k);
        break;
      case Algorithm::kCappedMsg:
        state = capped_msg_step(state, x, eta, k, rank_cap);
        break;
      case Algorithm::kIncremental:
        state = incremental_step(state, x, k);
        break;
      case Algorithm::kMeg:
        meg = meg_step(*meg, x, eta, k);
        state = meg->spectrum();
        break;
      case Algorithm::kStochasticPower:
        power = power_step(power, x, eta);
        state = EigenState(power, Eigen::VectorXd::Ones(k), 0.0, EigenState::Check::kNone);
        break;
    }
    if (dense_average) average_sum += reconstruct(state);

    TraceRecord record;
    record.t = t;
    record.rank = state.rank();
    record.eigenvalues.assign(state.values().data(), state.values().data() + state.columns());
    record.complement = state.complement();
    proxy += static_cast<double>(record.rank) * static_cast<double>(record.rank);
    record.runtime_proxy = proxy;
    if (evaluator && is_checkpoint(t, config.iterations)) record.suboptimality = evaluator(state);
    trace.records.push_back(std::move(record));
  }
  trace.final_state = state;

  if (dense_average && config.iterations > 0) {
    trace.averaged = average_sum / static_cast<double>(config.iterations);
  }
  if (config.rounding) {
    std::mt19937_64 rng(config.seed ^ kRoundingSeedSalt);
    const bool feasible_iterate = config.algorithm == Algorithm::kMsg ||
                                  config.algorithm == Algorithm::kCappedMsg ||
                                  config.algorithm == Algorithm::kMeg;
    if (trace.averaged && feasible_iterate) {
      Rounding r = round_to_rank_k(*trace.averaged, k, rng);
      trace.mixture = std::move(r.mixture);
      trace.rounded_basis = std::move(r.sample);
    } else if (feasible_iterate && config.iterations > 0) {
      Rounding r = round_to_rank_k(state, k, rng);
      trace.mixture = std::move(r.mixture);
      trace.rounded_basis = std::move(r.sample);
    } else {
      SubspaceMixture single;
      single.dim = d;
      single.k = k;
      single.components.push_back({1.0, top_directions(state, k)});
      trace.rounded_basis = single.components.front().basis;
      trace.mixture = std::move(single);
    }
  }
  return trace;
}

}  // namespace msgpca
