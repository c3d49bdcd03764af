#pragma once

// Counting the active-constraint graphs a system deadlock can exhibit.
//
// Edges stand for pairs of robots held exactly at the safety margin by an
// active constraint. Such a graph must be connected, and it must be drawable
// in the plane with every edge of length Ds and every non-edge strictly
// longer than Ds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "mrdl/core.hpp"
#include "mrdl/errors.hpp"

namespace mrdl {

using BigInt = boost::multiprecision::cpp_int;

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected simple graph on vertices 0..n-1; edges stored as (u < v),
/// sorted lexicographically.
struct LabeledGraph {
  std::size_t n = 0;
  std::vector<Edge> edges;

  bool has_edge(std::size_t u, std::size_t v) const {
    if (u > v) std::swap(u, v);
    return std::ranges::binary_search(edges, Edge{u, v});
  }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> d(n, 0);
    for (auto [u, v] : edges) {
      ++d[u];
      ++d[v];
    }
    return d;
  }

  std::size_t max_degree() const {
    const auto d = degrees();
    return d.empty() ? 0 : *std::ranges::max_element(d);
  }

  /// Stable 64-bit fingerprint of (n, edges), used to seed restarts.
  std::uint64_t hash() const;

  std::string to_string() const {
    std::string s = "n=" + std::to_string(n) + " {";
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (k) s += ' ';
      s += std::to_string(edges[k].first) + "-" + std::to_string(edges[k].second);
    }
    return s + "}";
  }

  bool operator==(const LabeledGraph&) const = default;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t LabeledGraph::hash() const {
  std::uint64_t h = splitmix64(n);
  for (auto [u, v] : edges) h = splitmix64(h ^ (u * 64 + v));
  return h;
}

inline LabeledGraph make_graph(std::size_t n, std::vector<Edge> edges) {
  for (auto& [u, v] : edges) {
    if (u == v) throw InvalidArgument("self-loops are not allowed");
    if (u >= n || v >= n) throw InvalidArgument("edge endpoint out of range");
    if (u > v) std::swap(u, v);
  }
  std::ranges::sort(edges);
  const auto dup = std::ranges::unique(edges);
  edges.erase(dup.begin(), dup.end());
  return {n, std::move(edges)};
}

inline bool is_connected(const LabeledGraph& g) {
  if (g.n <= 1) return true;
  std::vector<std::size_t> parent(g.n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = g.n;
  for (auto [u, v] : g.edges) {
    const auto a = find(u);
    const auto b = find(v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

inline BigInt binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  BigInt r = 1;
  for (unsigned i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

/// 2^C(N,2): the number of labeled graphs on N vertices.
inline BigInt upper_bound(unsigned n) {
  if (n < 2) return 1;
  return BigInt(1) << (n * (n - 1) / 2);
}

/// Number of connected labeled graphs on N vertices:
///   d_N = 2^C(N,2) - (1/N) sum_{k=1}^{N-1} k C(N,k) 2^C(N-k,2) d_k
inline BigInt connected_count(unsigned n) {
  if (n == 0) throw InvalidArgument("vertex count must be at least 1");
  std::vector<BigInt> d(n + 1);
  for (unsigned m = 1; m <= n; ++m) {
    BigInt sum = 0;
    for (unsigned k = 1; k < m; ++k) sum += k * binomial(m, k) * upper_bound(m - k) * d[k];
    d[m] = upper_bound(m) - sum / m;
  }
  return d[n];
}

/// (N+1)(N-1)!/2 for N >= 3, and 1 for N = 1, 2.
inline BigInt lower_bound(unsigned n) {
  if (n == 0) throw InvalidArgument("vertex count must be at least 1");
  if (n < 3) return 1;
  BigInt f = 1;
  for (unsigned k = 2; k < n; ++k) f *= k;
  return (n + 1) * f / 2;
}

/// Every connected labeled graph on N <= 6 vertices, in increasing order of
/// the edge bitmask over the lexicographic pair list.
inline std::vector<LabeledGraph> enumerate_connected(unsigned n) {
  if (n == 0 || n > 6) throw InvalidArgument("exhaustive enumeration supports 1 <= N <= 6");
  const auto pairs = robot_pairs(n);
  std::vector<LabeledGraph> out;
  const std::uint64_t total = std::uint64_t{1} << pairs.size();
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    LabeledGraph g{n, {}};
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if (mask >> k & 1U) g.edges.push_back(pairs[k]);
    }
    if (is_connected(g)) out.push_back(std::move(g));
  }
  return out;
}

struct EmbeddingOptions {
  int attempts = 200;
  double tol = 1e-9;          ///< accepted violation, relative to Ds
  double margin = 1e-3;       ///< non-edge slack, relative to Ds
  int max_iterations = 200;   ///< Levenberg-Marquardt iterations per attempt
};

struct EmbeddingResult {
  bool feasible = false;
  std::vector<Vec2> positions;  ///< empty unless feasible
  double max_violation = 0.0;   ///< best found, in units of Ds
  int attempts_used = 0;
};

/// Largest violation of the edge / non-edge distance conditions, in units
/// of Ds, computed directly from positions.
inline double embedding_violation(const LabeledGraph& g, const std::vector<Vec2>& p,
                                  double ds, double margin) {
  double worst = 0.0;
  for (auto [u, v] : robot_pairs(g.n)) {
    const double d = (p[u] - p[v]).norm();
    const double viol = g.has_edge(u, v) ? std::abs(d - ds)
                                         : std::max(0.0, ds * (1.0 + margin) - d);
    worst = std::max(worst, viol / ds);
  }
  return worst;
}

namespace detail {

/// Residuals of the penalized least-squares embedding problem, in units of Ds.
inline void embedding_residuals(const LabeledGraph& g, const Eigen::VectorXd& x,
                                double margin, Eigen::VectorXd& r,
                                Eigen::MatrixXd& J) {
  const auto pairs = robot_pairs(g.n);
  r.setZero(static_cast<Eigen::Index>(pairs.size()));
  J.setZero(static_cast<Eigen::Index>(pairs.size()), x.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [u, v] = pairs[k];
    const Vec2 dp(x(2 * u) - x(2 * v), x(2 * u + 1) - x(2 * v + 1));
    const double d = std::max(dp.norm(), 1e-12);
    const Vec2 grad = dp / d;
    double sign = 0.0;
    const auto row = static_cast<Eigen::Index>(k);
    if (g.has_edge(u, v)) {
      r(row) = d - 1.0;
      sign = 1.0;
    } else if (d < 1.0 + margin) {
      r(row) = 1.0 + margin - d;
      sign = -1.0;
    }
    if (sign != 0.0) {
      J(row, 2 * u) = sign * grad.x();
      J(row, 2 * u + 1) = sign * grad.y();
      J(row, 2 * v) = -sign * grad.x();
      J(row, 2 * v + 1) = -sign * grad.y();
    }
  }
}

/// Levenberg-Marquardt on the unit-margin problem from x.
inline void levenberg_marquardt(const LabeledGraph& g, Eigen::VectorXd& x,
                                double margin, int iterations) {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  embedding_residuals(g, x, margin, r, J);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < iterations && cost > 1e-30; ++it) {
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd Jtr = J.transpose() * r;
    Eigen::MatrixXd H = JtJ;
    H.diagonal().array() += lambda * (1.0 + JtJ.diagonal().array());
    const Eigen::VectorXd step = H.ldlt().solve(-Jtr);
    Eigen::VectorXd trial = x + step;
    Eigen::VectorXd r_trial;
    Eigen::MatrixXd J_trial;
    embedding_residuals(g, trial, margin, r_trial, J_trial);
    const double trial_cost = r_trial.squaredNorm();
    if (trial_cost < cost) {
      x = std::move(trial);
      r = std::move(r_trial);
      J = std::move(J_trial);
      cost = trial_cost;
      lambda = std::max(lambda / 3.0, 1e-12);
    } else {
      lambda *= 4.0;
      if (lambda > 1e12) break;
    }
  }
}

}  // namespace detail

/// Searches for a planar drawing of g with edge lengths Ds and non-edge
/// lengths at least Ds (1 + margin). Restart k is seeded from
/// (g.hash(), k), so the verdict is reproducible. An infeasible verdict means
/// every restart failed; it is not a proof.
inline EmbeddingResult embed_graph(const LabeledGraph& g, double ds,
                                   const EmbeddingOptions& opt = {}) {
  if (!(ds > 0.0)) throw InvalidArgument("safety margin must be positive");
  if (!is_connected(g)) throw InvalidArgument("embedding expects a connected graph");
  EmbeddingResult res;
  res.max_violation = std::numeric_limits<double>::infinity();
  if (g.n == 1) {
    res.feasible = true;
    res.positions = {Vec2::Zero()};
    res.max_violation = 0.0;
    return res;
  }
  const double spread = std::sqrt(static_cast<double>(g.n));
  const auto dim = static_cast<Eigen::Index>(2 * g.n);
  for (int attempt = 0; attempt < opt.attempts; ++attempt) {
    std::mt19937_64 rng(splitmix64(g.hash() ^ splitmix64(static_cast<std::uint64_t>(attempt))));
    std::uniform_real_distribution<double> uni(0.0, spread);
    Eigen::VectorXd x(dim);
    for (Eigen::Index k = 0; k < dim; ++k) x(k) = uni(rng);
    detail::levenberg_marquardt(g, x, opt.margin, opt.max_iterations);

    std::vector<Vec2> p(g.n);
    for (std::size_t v = 0; v < g.n; ++v) p[v] = ds * Vec2(x(2 * v), x(2 * v + 1));
    const double viol = embedding_violation(g, p, ds, opt.margin);
    res.attempts_used = attempt + 1;
    res.max_violation = std::min(res.max_violation, viol);
    if (viol <= opt.tol) {
      res.feasible = true;
      res.positions = std::move(p);
      res.max_violation = viol;
      return res;
    }
  }
  return res;
}

struct CensusEntry {
  LabeledGraph graph;
  EmbeddingResult embedding;
};

struct CensusRow {
  unsigned n = 0;
  BigInt upper;
  BigInt connected;
  std::size_t admissible = 0;
  BigInt lower;
  std::vector<CensusEntry> entries;  ///< every connected graph with its verdict
};

/// Number of connected graphs on N <= 4 vertices that admit an embedding.
inline CensusRow count_admissible(unsigned n, double ds,
                                  const EmbeddingOptions& opt = {}) {
  if (n == 0 || n > 4) throw InvalidArgument("admissible census supports 1 <= N <= 4");
  CensusRow row{n, upper_bound(n), connected_count(n), 0, lower_bound(n), {}};
  for (auto& g : enumerate_connected(n)) {
    auto emb = embed_graph(g, ds, opt);
    if (emb.feasible) ++row.admissible;
    row.entries.push_back({std::move(g), std::move(emb)});
  }
  return row;
}

}  // namespace mrdl
