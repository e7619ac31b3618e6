#include "msgpca/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace msgpca::oracle {

using Eigen::Index;

SymmetricEigen jacobi_eigensymm(const Eigen::MatrixXd& input, double tol, int max_sweeps) {
  const Index n = input.rows();
  if (input.cols() != n) throw std::invalid_argument("jacobi: matrix must be square");
  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * scale) break;

    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) <= std::numeric_limits<double>::min()) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index r = 0; r < n; ++r) {
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (Index r = 0; r < n; ++r) {
          const double apr = a(p, r), aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        for (Index r = 0; r < n; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) > a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

std::pair<double, double> eigenvalues_2x2(double a, double b, double c) {
  // lambda^2 - (a + c) lambda + (ac - b^2) = 0
  const double mean = 0.5 * (a + c);
  const double radius = std::hypot(0.5 * (a - c), b);
  return {mean + radius, mean - radius};
}

Eigen::VectorXd capped_simplex(const Eigen::VectorXd& values, double k) {
  const Index n = values.size();
  if (k < 0 || k > static_cast<double>(n)) throw std::invalid_argument("capped_simplex: bad k");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index i, Index j) { return values[i] > values[j]; });
  Eigen::VectorXd s(n);
  for (Index i = 0; i < n; ++i) s[i] = values[order[i]];

  const double slack = 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff());
  double best_shift = std::numeric_limits<double>::quiet_NaN();
  // The top `ones` entries clip to one, the bottom `zeros` clip to zero and
  // the rest get s_i + S with S fixed by the trace.
  for (Index ones = 0; ones <= n && std::isnan(best_shift); ++ones) {
    for (Index zeros = 0; ones + zeros <= n; ++zeros) {
      const Index free = n - ones - zeros;
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      if (ones > 0) lo = std::max(lo, 1.0 - s[ones - 1]);
      if (zeros > 0) hi = std::min(hi, -s[n - zeros]);
      double shift;
      if (free > 0) {
        shift = (k - static_cast<double>(ones) - s.segment(ones, free).sum()) /
                static_cast<double>(free);
        lo = std::max(lo, -s[ones + free - 1]);      // s_i + S >= 0
        hi = std::min(hi, 1.0 - s[ones]);             // s_i + S <= 1
      } else {
        if (std::abs(static_cast<double>(ones) - k) > 1e-12) continue;
        shift = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
      }
      if (shift >= lo - slack && shift <= hi + slack) {
        best_shift = shift;
        break;
      }
    }
  }
  if (std::isnan(best_shift)) throw std::runtime_error("capped_simplex: no KKT point found");
  return (values.array() + best_shift).cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::VectorXd capped_simplex_bisection(const Eigen::VectorXd& values, double k) {
  const Index n = values.size();
  if (k < 0 || k > static_cast<double>(n)) throw std::invalid_argument("bisection: bad k");
  auto mass = [&](double shift) {
    return (values.array() + shift).cwiseMax(0.0).cwiseMin(1.0).sum();
  };
  double lo = -values.maxCoeff() - 1.0;
  double hi = 1.0 - values.minCoeff() + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) < k ? lo : hi) = mid;
  }
  return (values.array() + 0.5 * (lo + hi)).cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::VectorXd capped_rank(const Eigen::VectorXd& values, Index k, Index rank_cap) {
  const Index n = values.size();
  if (k < 1 || k > n || rank_cap < k) throw std::invalid_argument("capped_rank: bad k or K");
  const Index cap = std::min(rank_cap, n);
  if (n > 20) throw std::invalid_argument("capped_rank: too many entries for enumeration");

  Eigen::VectorXd best;
  double best_cost = std::numeric_limits<double>::infinity();
  Index best_size = 0;
  const std::uint32_t subsets = 1u << n;
  for (std::uint32_t mask = 1; mask < subsets; ++mask) {
    const auto size = static_cast<Index>(std::popcount(mask));
    if (size < k || size > cap) continue;
    Eigen::VectorXd sub(size);
    std::vector<Index> members;
    for (Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        sub[static_cast<Index>(members.size())] = values[i];
        members.push_back(i);
      }
    }
    const Eigen::VectorXd projected = capped_simplex(sub, static_cast<double>(k));
    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < members.size(); ++j) {
      candidate[members[j]] = projected[static_cast<Index>(j)];
    }
    const double cost = (candidate - values).squaredNorm();
    if (cost < best_cost - 1e-12 || (cost <= best_cost + 1e-12 && size < best_size)) {
      best_cost = std::min(cost, best_cost);
      best = candidate;
      best_size = size;
    }
  }
  return best;
}

Eigen::VectorXd entropic(const Eigen::VectorXd& values, double k) {
  if ((values.array() < 0.0).any()) throw std::invalid_argument("entropic: negative entry");
  const Index positive = (values.array() > 0.0).count();
  if (static_cast<double>(positive) < k) throw std::invalid_argument("entropic: too little mass");
  auto mass = [&](double c) { return (values.array() * c).cwiseMin(1.0).sum(); };
  double lo = 0.0;
  double hi = 1.0;
  while (mass(hi) < k) hi *= 2.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) < k ? lo : hi) = mid;
  }
  return (values.array() * hi).cwiseMin(1.0);
}

}  // namespace msgpca::oracle
