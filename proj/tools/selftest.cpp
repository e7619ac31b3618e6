#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "cli.hpp"
#include "msgpca/dense_eig.hpp"
#include "msgpca/eigen_state.hpp"
#include "msgpca/oracles.hpp"
#include "msgpca/projection.hpp"
#include "msgpca/rounding.hpp"

namespace msgpca::cli {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Suite {
  std::string name;
  // Returns true when instance `i` agrees with its oracle.
  std::function<bool(std::mt19937_64&)> check;
};

VectorXd uniform(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

Index pick(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

MatrixXd orthonormal(std::mt19937_64& rng, Index d, Index m) {
  std::normal_distribution<double> g;
  MatrixXd a(d, d);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  const Eigen::HouseholderQR<MatrixXd> qr(a);
  return (qr.householderQ() * MatrixXd::Identity(d, m));
}

VectorXd sorted_desc(VectorXd v) {
  std::sort(v.data(), v.data() + v.size(), std::greater<>());
  return v;
}

double max_diff(const VectorXd& a, const VectorXd& b) {
  return a.size() == b.size() ? (a - b).cwiseAbs().maxCoeff() : INFINITY;
}

}  // namespace

int run_selftest(const SelftestOptions& options, std::ostream& out) {
  const bool mutate = options.mutate_projection;
  auto corrupt = [mutate](EigenState s) {
    if (!mutate || s.columns() == 0) return s;
    VectorXd v = s.values();
    v[0] += 1e-3;
    return EigenState(s.basis(), v, s.complement());
  };

  std::vector<Suite> suites;
  suites.push_back({"capped-simplex projection vs KKT enumeration", [&](std::mt19937_64& rng) {
                      const Index d = pick(rng, 1, 12);
                      const Index k = pick(rng, 1, d);
                      const VectorXd v = uniform(rng, d, -1.0, 2.0);
                      const EigenState s(orthonormal(rng, d, d), v);
                      const EigenState p = corrupt(project_capped_simplex(s, k));
                      const VectorXd expect = sorted_desc(oracle::capped_simplex(v, k));
                      return max_diff(p.expanded_values(), expect) < 1e-9;
                    }});
  suites.push_back({"capped-rank projection vs support enumeration", [&](std::mt19937_64& rng) {
                      const Index d = pick(rng, 1, 10);
                      const Index k = pick(rng, 1, d);
                      const Index cap = pick(rng, k, d);
                      const VectorXd v = uniform(rng, d, -0.5, 1.5);
                      const EigenState s(MatrixXd::Identity(d, d), v);
                      const EigenState p = corrupt(project_capped_rank(s, k, cap));
                      const VectorXd expect = oracle::capped_rank(v, k, cap);
                      const double got = (reconstruct(p).diagonal() - v).squaredNorm();
                      const double best = (expect - v).squaredNorm();
                      return std::abs(got - best) < 1e-9 && p.rank() <= cap &&
                             std::abs(p.trace() - static_cast<double>(k)) < 1e-9;
                    }});
  suites.push_back({"entropic projection vs bisection", [&](std::mt19937_64& rng) {
                      const Index d = pick(rng, 1, 12);
                      const Index k = pick(rng, 1, d);
                      const VectorXd v = uniform(rng, d, 0.01, 3.0);
                      const EigenState s(MatrixXd::Identity(d, d), v);
                      const EigenState p = corrupt(project_entropic(s, k));
                      return max_diff(p.expanded_values(), sorted_desc(oracle::entropic(v, k))) <
                             1e-9;
                    }});
  suites.push_back({"rank-1 update vs dense eigensolve", [&](std::mt19937_64& rng) {
                      const Index d = pick(rng, 1, 10);
                      const Index m = pick(rng, 0, d);
                      const EigenState s(orthonormal(rng, d, m), uniform(rng, m, 0.0, 2.0),
                                         pick(rng, 0, 1) ? 0.0 : 0.3);
                      const VectorXd x = uniform(rng, d, -1.0, 1.0);
                      const double eta = uniform(rng, 1, 0.01, 2.0)[0];
                      const EigenState u = rank1_update(s, x, eta);
                      const MatrixXd dense = reconstruct(s) + eta * x * x.transpose();
                      const VectorXd expect = oracle::jacobi_eigensymm(dense).values;
                      return max_diff(u.expanded_values(), expect) < 1e-9 &&
                             (reconstruct(u) - dense).cwiseAbs().maxCoeff() < 1e-9 &&
                             u.orthonormality_error() < kOrthonormalityTolerance;
                    }});
  suites.push_back({"dense eigensolve vs Jacobi", [&](std::mt19937_64& rng) {
                      const Index d = pick(rng, 1, 12);
                      std::normal_distribution<double> g;
                      MatrixXd a(d, d);
                      for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
                      a = (0.5 * (a + a.transpose())).eval();
                      const SymmetricEigen e = dense_eigensymm(a);
                      const MatrixXd back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
                      return max_diff(e.values, oracle::jacobi_eigensymm(a).values) < 1e-9 &&
                             (back - a).cwiseAbs().maxCoeff() < 1e-9;
                    }});
  suites.push_back({"rank-k rounding reconstructs its input", [&](std::mt19937_64& rng) {
                      const Index d = pick(rng, 1, 12);
                      const Index k = pick(rng, 1, d);
                      const VectorXd v = oracle::capped_simplex(uniform(rng, d, -1.0, 2.0), k);
                      const MatrixXd u = orthonormal(rng, d, d);
                      const MatrixXd m = u * v.asDiagonal() * u.transpose();
                      const SubspaceMixture mix = decompose(m, k);
                      return static_cast<Index>(mix.components.size()) <= d &&
                             std::abs(mix.total_weight() - 1.0) < 1e-9 &&
                             (mix.reconstruct() - m).cwiseAbs().maxCoeff() < 1e-8;
                    }});

  bool all = true;
  for (std::size_t s = 0; s < suites.size(); ++s) {
    std::mt19937_64 rng(options.seed * 1000003ULL + s);
    long long passed = 0;
    for (long long i = 0; i < options.instances; ++i) {
      bool ok = false;
      try {
        ok = suites[s].check(rng);
      } catch (const std::exception&) {
        ok = false;
      }
      passed += ok ? 1 : 0;
    }
    const bool pass = passed == options.instances;
    all = all && pass;
    fmt::print(out, "{} {}: {}/{} instances\n", pass ? "PASS" : "FAIL", suites[s].name, passed,
               options.instances);
  }
  fmt::print(out, "selftest: {}\n", all ? "PASS" : "FAIL");
  return all ? kExitOk : kExitFailure;
}

}  // namespace msgpca::cli
