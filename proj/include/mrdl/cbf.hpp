#pragma once

// Pairwise safety index for two double-integrator robots with acceleration
// limits, and the linear constraint on their controls that keeps
//
//   dh/dt >= -h^3
//
// The constraint on the relative control is split between the two robots in
// proportion to their acceleration limits.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "mrdl/constraint.hpp"
#include "mrdl/core.hpp"
#include "mrdl/errors.hpp"
#include "mrdl/qp.hpp"

namespace mrdl {

/// States with |r - Ds| below this count as lying on the safety margin.
inline constexpr double kBoundaryBand = 1e-9;

namespace detail {

struct PairGeometry {
  Vec2 dp;         ///< p_i - p_j
  Vec2 dv;         ///< v_i - v_j
  double r;        ///< ||dp||
  double gap;      ///< r - Ds
  double radial;   ///< dp . dv
  double alpha_sum;
};

inline PairGeometry pair_geometry(const RobotState& zi, const RobotState& zj,
                                  double alpha_i, double alpha_j, double ds) {
  PairGeometry g;
  g.dp = zi.p - zj.p;
  g.dv = zi.v - zj.v;
  g.r = g.dp.norm();
  if (g.r == 0.0) throw CoincidentRobots("robots occupy the same position");
  g.gap = g.r - ds;
  if (g.gap <= -kBoundaryBand) {
    throw SafetyViolated(-g.gap, "pair distance " + std::to_string(g.r) +
                                     " is inside the safety margin " +
                                     std::to_string(ds));
  }
  g.radial = g.dp.dot(g.dv);
  g.alpha_sum = alpha_i + alpha_j;
  return g;
}

inline double margin_root(const PairGeometry& g) {
  if (std::abs(g.gap) < kBoundaryBand) return 0.0;
  return std::sqrt(2.0 * g.alpha_sum * g.gap);
}

}  // namespace detail

/// h_ij = sqrt(2 (alpha_i + alpha_j)(||dp|| - Ds)) + dp^T dv / ||dp||.
inline double safety_index(const RobotState& zi, const RobotState& zj,
                           double alpha_i, double alpha_j, double ds) {
  const auto g = detail::pair_geometry(zi, zj, alpha_i, alpha_j, ds);
  return detail::margin_root(g) + g.radial / g.r;
}

inline double safety_index(const WorldState& world, std::size_t i, std::size_t j,
                           const Params& params) {
  return safety_index(world.robots.at(i), world.robots.at(j), params.alpha.at(i),
                      params.alpha.at(j), params.ds);
}

/// Continuous extension of h through the margin, for logging and audits:
/// sign(gap) sqrt(2 (alpha_i + alpha_j) |gap|) + dp^T dv / ||dp||.
/// Never throws on penetration, only on coincident robots.
inline double signed_safety_index(const RobotState& zi, const RobotState& zj,
                                  double alpha_i, double alpha_j, double ds) {
  const Vec2 dp = zi.p - zj.p;
  const double r = dp.norm();
  if (r == 0.0) throw CoincidentRobots("robots occupy the same position");
  const double gap = r - ds;
  const double root = std::sqrt(2.0 * (alpha_i + alpha_j) * std::abs(gap));
  return std::copysign(root, gap) + dp.dot(zi.v - zj.v) / r;
}

inline double signed_safety_index(const WorldState& world, std::size_t i,
                                  std::size_t j, const Params& params) {
  return signed_safety_index(world.robots.at(i), world.robots.at(j),
                             params.alpha.at(i), params.alpha.at(j), params.ds);
}

/// Right-hand side b_ij of -dp^T (u_i - u_j) <= b_ij:
///
///   ||dp|| h^3 + (alpha_i + alpha_j) dp^T dv / sqrt(2 (alpha_i + alpha_j)(||dp|| - Ds))
///   + ||dv||^2 - (dp^T dv)^2 / ||dp||^2
///
/// On the margin the middle term is 0/0; it is taken as 0 when the radial
/// velocity vanishes and is a BoundarySingularity otherwise.
inline double constraint_bound(const RobotState& zi, const RobotState& zj,
                               double alpha_i, double alpha_j, double ds) {
  const auto g = detail::pair_geometry(zi, zj, alpha_i, alpha_j, ds);
  const double root = detail::margin_root(g);
  const double h = root + g.radial / g.r;
  double middle = 0.0;
  if (root == 0.0) {
    if (std::abs(g.radial) >= kBoundaryBand) {
      throw BoundarySingularity("nonzero radial velocity " +
                                std::to_string(g.radial) +
                                " on the safety margin");
    }
  } else {
    middle = g.alpha_sum * g.radial / root;
  }
  return g.r * h * h * h + middle + g.dv.squaredNorm() -
         g.radial * g.radial / (g.r * g.r);
}

inline double constraint_bound(const WorldState& world, std::size_t i,
                               std::size_t j, const Params& params) {
  return constraint_bound(world.robots.at(i), world.robots.at(j),
                          params.alpha.at(i), params.alpha.at(j), params.ds);
}

/// The pair constraint split between robots i and j; the two bounds sum to
/// b_ij and each is weighted by that robot's share of the acceleration budget.
inline std::pair<ConstraintRow, ConstraintRow> decentralized_rows(
    const WorldState& world, std::size_t i, std::size_t j, const Params& params) {
  const double b = constraint_bound(world, i, j, params);
  const double ai = params.alpha.at(i);
  const double aj = params.alpha.at(j);
  const Vec2 dp = world.robots.at(i).p - world.robots.at(j).p;
  return {ConstraintRow{-dp, ai / (ai + aj) * b, NeighborRow{j}},
          ConstraintRow{dp, aj / (ai + aj) * b, NeighborRow{i}}};
}

/// Robot i's program: centre u_hat_i, one row per other robot in ascending
/// id order, then the four box rows.
inline QPProblem assemble_qp(std::size_t i, const WorldState& world,
                             const GoalSpec& goals, const Params& params) {
  QPProblem problem;
  problem.u_hat = pd_control(world.robots.at(i), goals.pd.at(i), params);
  for (std::size_t j = 0; j < world.size(); ++j) {
    if (j == i) continue;
    problem.rows.push_back(decentralized_rows(world, i, j, params).first);
  }
  for (const auto& row : box_rows(params.alpha.at(i))) problem.rows.push_back(row);
  return problem;
}

/// Index of robot i's row for neighbor j in the layout of assemble_qp.
inline std::size_t neighbor_row_index(std::size_t i, std::size_t j) {
  return j < i ? j : j - 1;
}

}  // namespace mrdl
