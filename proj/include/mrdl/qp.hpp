#pragma once

// Exact solver for the two-variable program
//
//   minimize ||u - u_hat||^2   subject to   a_k^T u <= b_k,  k = 0..m-1
//
// The decision variable lives in R^2, so a nondegenerate optimum has at most
// two active rows. Every working set of size 0, 1 and 2 is tried in a fixed
// order; the first one whose stationary point is primal feasible with
// nonnegative multipliers is the unique optimum. Multipliers follow the
// convention u* = u_hat - 1/2 * sum_k mu_k a_k.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrdl/constraint.hpp"
#include "mrdl/errors.hpp"

namespace mrdl {

struct QPProblem {
  Vec2 u_hat = Vec2::Zero();
  std::vector<ConstraintRow> rows;
};

enum class QpStatus { optimal, infeasible };

struct QPSolution {
  Vec2 u_star = Vec2::Zero();
  std::vector<double> mu;                ///< one multiplier per row
  std::vector<std::size_t> active_set;   ///< rows touching u* within tolerance
  std::vector<std::size_t> working_set;  ///< rows that certified optimality
  QpStatus status = QpStatus::optimal;
  double phase_one_slack = 0.0;  ///< only meaningful when infeasible
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const {
    return std::max({stationarity, primal, dual, complementarity});
  }
  bool ok(double tol) const { return max() <= tol; }
};

namespace qp_tol {
/// |a^T u - b| <= kActive * (1 + |b|) classifies a row as active.
inline constexpr double kActive = 1e-7;
/// Accepted primal violation of a candidate, scaled by (1 + |b|).
inline constexpr double kPrimal = 1e-9;
/// Accepted negative multiplier, scaled by (1 + max |mu|).
inline constexpr double kDual = 1e-10;
/// Declared infeasible when the best normalized slack is below this.
inline constexpr double kInfeasible = -1e-9;
/// Two rows are parallel when |det| <= kSingular * |a_k| |a_l|.
inline constexpr double kSingular = 1e-12;
}  // namespace qp_tol

inline double qp_objective(const QPProblem& problem, const Vec2& u) {
  return (u - problem.u_hat).squaredNorm();
}

inline bool qp_feasible(const QPProblem& problem, const Vec2& u,
                        double rel_tol = qp_tol::kPrimal) {
  return std::ranges::all_of(problem.rows, [&](const ConstraintRow& r) {
    return r.a.dot(u) - r.b_hat <= rel_tol * (1.0 + std::abs(r.b_hat));
  });
}

/// Phase-I probe: max over u of min_k (b_k - a_k^T u) / |a_k|.
///
/// Linear program in (u, t); its optimum sits on a vertex fixed by three
/// rows, so all triples are enumerated. Returns +inf for fewer than three
/// rows (the program is then unbounded).
inline double phase_one_slack(const QPProblem& problem) {
  const auto& rows = problem.rows;
  const std::size_t m = rows.size();
  if (m < 3) return std::numeric_limits<double>::infinity();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      for (std::size_t k = j + 1; k < m; ++k) {
        Eigen::Matrix3d A;
        Eigen::Vector3d b;
        std::size_t r = 0;
        for (std::size_t idx : {i, j, k}) {
          const double n = rows[idx].a.norm();
          if (n == 0.0) break;
          A.row(r) << rows[idx].a.x(), rows[idx].a.y(), n;
          b(r) = rows[idx].b_hat;
          ++r;
        }
        if (r != 3) continue;
        Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
        if (!lu.isInvertible()) continue;
        const Eigen::Vector3d x = lu.solve(b);
        const Vec2 u(x(0), x(1));
        const double t = x(2);
        bool ok = true;
        for (const auto& row : rows) {
          const double n = row.a.norm();
          if (row.a.dot(u) + t * n > row.b_hat + 1e-12 * (1.0 + std::abs(row.b_hat))) {
            ok = false;
            break;
          }
        }
        if (ok) best = std::max(best, t);
      }
    }
  }
  return best;
}

namespace detail {

struct Candidate {
  Vec2 u;
  std::vector<std::size_t> set;
  std::vector<double> set_mu;
};

inline std::optional<Candidate> stationary_point(const QPProblem& problem,
                                                 std::vector<std::size_t> set) {
  const Vec2& u_hat = problem.u_hat;
  if (set.empty()) return Candidate{u_hat, {}, {}};
  if (set.size() == 1) {
    const auto& row = problem.rows[set[0]];
    const double nn = row.a.squaredNorm();
    if (nn == 0.0) return std::nullopt;
    const double mu = 2.0 * (row.a.dot(u_hat) - row.b_hat) / nn;
    return Candidate{u_hat - 0.5 * mu * row.a, std::move(set), {mu}};
  }
  const auto& rk = problem.rows[set[0]];
  const auto& rl = problem.rows[set[1]];
  Eigen::Matrix2d A;
  A.row(0) = rk.a.transpose();
  A.row(1) = rl.a.transpose();
  const double det = A.determinant();
  if (std::abs(det) <= qp_tol::kSingular * rk.a.norm() * rl.a.norm()) {
    return std::nullopt;  // parallel rows; the working set is degenerate
  }
  // Both rows tight: A u = b. Stationarity u_hat - u = 1/2 A^T mu.
  const Vec2 u = A.partialPivLu().solve(Vec2(rk.b_hat, rl.b_hat));
  const Vec2 mu = 2.0 * A.transpose().partialPivLu().solve(u_hat - u);
  return Candidate{u, std::move(set), {mu(0), mu(1)}};
}

inline bool acceptable(const QPProblem& problem, const Candidate& c) {
  double scale = 1.0;
  for (double m : c.set_mu) scale = std::max(scale, 1.0 + std::abs(m));
  for (double m : c.set_mu) {
    if (m < -qp_tol::kDual * scale) return false;
  }
  return qp_feasible(problem, c.u);
}

/// Working sets in enumeration order: {}, {0}, {1}, ..., {0,1}, {0,2}, ...
inline std::vector<std::vector<std::size_t>> working_sets(std::size_t m) {
  std::vector<std::vector<std::size_t>> sets{{}};
  for (std::size_t i = 0; i < m; ++i) sets.push_back({i});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) sets.push_back({i, j});
  }
  return sets;
}

}  // namespace detail

/// Unique minimizer of ||u - u_hat||^2 over {a_k^T u <= b_k} with its
/// multipliers.
///
/// Returns status `infeasible` when no working set certifies an optimum and
/// the phase-I probe confirms the polytope is empty. Throws NumericalFailure
/// if the probe says feasible but no certificate was found, or if two
/// certificates disagree on the primal point.
inline QPSolution solve_qp(const QPProblem& problem) {
  const std::size_t m = problem.rows.size();
  std::optional<detail::Candidate> accepted;
  for (auto& set : detail::working_sets(m)) {
    auto c = detail::stationary_point(problem, std::move(set));
    if (!c || !detail::acceptable(problem, *c)) continue;
    if (!accepted) {
      accepted = std::move(c);
      continue;
    }
    // Strict convexity makes the primal point unique; any other certificate
    // must reproduce it.
    if ((c->u - accepted->u).norm() > 1e-6 * (1.0 + accepted->u.norm())) {
      throw NumericalFailure("qp: two working sets certify different optima");
    }
  }

  QPSolution sol;
  sol.mu.assign(m, 0.0);
  if (!accepted) {
    sol.phase_one_slack = phase_one_slack(problem);
    if (sol.phase_one_slack < qp_tol::kInfeasible) {
      sol.status = QpStatus::infeasible;
      sol.u_star = problem.u_hat;
      return sol;
    }
    throw NumericalFailure("qp: feasible polytope (slack " +
                           std::to_string(sol.phase_one_slack) +
                           ") but no working set certified an optimum");
  }

  sol.status = QpStatus::optimal;
  sol.u_star = accepted->u;
  sol.working_set = accepted->set;
  for (std::size_t s = 0; s < accepted->set.size(); ++s) {
    sol.mu[accepted->set[s]] = std::max(0.0, accepted->set_mu[s]);
  }
  for (std::size_t k = 0; k < m; ++k) {
    const auto& row = problem.rows[k];
    if (std::abs(row.a.dot(sol.u_star) - row.b_hat) <=
        qp_tol::kActive * (1.0 + std::abs(row.b_hat))) {
      sol.active_set.push_back(k);
    }
  }
  return sol;
}

/// Residuals of stationarity, primal feasibility, dual feasibility and
/// complementary slackness for a claimed primal-dual pair.
inline KktResiduals verify_kkt(const QPProblem& problem, const QPSolution& sol) {
  KktResiduals r;
  Vec2 grad = sol.u_star - problem.u_hat;
  for (std::size_t k = 0; k < problem.rows.size(); ++k) {
    const auto& row = problem.rows[k];
    const double mu = k < sol.mu.size() ? sol.mu[k] : 0.0;
    const double g = row.a.dot(sol.u_star) - row.b_hat;
    grad += 0.5 * mu * row.a;
    r.primal = std::max(r.primal, g);
    r.dual = std::max(r.dual, -mu);
    r.complementarity = std::max(r.complementarity, std::abs(mu * g));
  }
  r.stationarity = grad.norm();
  return r;
}

}  // namespace mrdl
