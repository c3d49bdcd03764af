#pragma once

// Deadlock detection from the primal-dual answer of each robot's program,
// and the analytical families of deadlocked configurations for two and
// three robots.
//
// A robot is deadlocked when its optimal control and velocity vanish while
// it is away from its goal, so that the goal-seeking reference u_hat is
// exactly balanced by the repulsion (1/2) sum mu_k a_k of its active
// neighbor constraints.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrdl/cbf.hpp"
#include "mrdl/core.hpp"
#include "mrdl/errors.hpp"
#include "mrdl/qp.hpp"

namespace mrdl {

struct DeadlockThresholds {
  double eps_u = 5e-4;     ///< control norm (m/s^2)
  double eps_v = 1e-3;     ///< velocity norm (m/s)
  double eps_goal = 0.05;  ///< minimum distance to goal (m)
  double eps_mu = 1e-6;    ///< minimum neighbor multiplier
  double geom_tol = 5e-7;  ///< distance tolerance for margin tests (m)
  int persist_steps = 10;  ///< consecutive steps before a deadlock is declared

  /// Defaults scaled by the problem data.
  static DeadlockThresholds defaults(const Params& params) {
    DeadlockThresholds t;
    t.eps_u = 1e-3 * params.kp * params.ds;
    t.eps_v = 1e-3;
    t.eps_goal = 0.1 * params.ds;
    t.eps_mu = 1e-6;
    t.geom_tol = 1e-6 * params.ds;
    t.persist_steps = 10;
    return t;
  }

  void validate() const {
    if (!(eps_u > 0.0) || !(eps_v > 0.0) || !(eps_goal > 0.0) ||
        !(eps_mu > 0.0) || !(geom_tol > 0.0) || persist_steps < 1) {
      throw InvalidArgument("deadlock thresholds must be positive");
    }
  }
};

struct ActiveMultiplier {
  std::size_t row = 0;
  double mu = 0.0;
  bool operator==(const ActiveMultiplier&) const = default;
};

struct DeadlockReport {
  std::size_t robot = 0;
  bool verdict = false;
  double u_star_norm = 0.0;
  double v_norm = 0.0;
  double goal_dist = 0.0;
  double max_neighbor_mu = 0.0;
  std::vector<ActiveMultiplier> active_multipliers;
  double force_balance_residual = 0.0;  ///< ||u_hat - 1/2 sum_{active} mu a||
};

/// The program of one robot together with its solution.
struct RobotProgram {
  QPProblem problem;
  QPSolution solution;
};

/// Assembles and solves every robot's program at `world`.
inline std::vector<RobotProgram> solve_all(const WorldState& world,
                                           const GoalSpec& goals,
                                           const Params& params) {
  std::vector<RobotProgram> out;
  out.reserve(world.size());
  for (std::size_t i = 0; i < world.size(); ++i) {
    RobotProgram prog{assemble_qp(i, world, goals, params), {}};
    prog.solution = solve_qp(prog.problem);
    out.push_back(std::move(prog));
  }
  return out;
}

inline double force_balance_residual(const QPProblem& problem,
                                     const QPSolution& solution) {
  Vec2 r = problem.u_hat;
  for (std::size_t k : solution.active_set) {
    r -= 0.5 * solution.mu.at(k) * problem.rows.at(k).a;
  }
  return r.norm();
}

inline DeadlockReport detect_deadlock(std::size_t i, const WorldState& world,
                                      const GoalSpec& goals,
                                      const RobotProgram& program,
                                      const DeadlockThresholds& thresholds) {
  const auto& sol = program.solution;
  DeadlockReport rep;
  rep.robot = i;
  rep.u_star_norm = sol.u_star.norm();
  rep.v_norm = world.robots.at(i).v.norm();
  rep.goal_dist = (world.robots.at(i).p - goals.pd.at(i)).norm();
  for (std::size_t k : sol.active_set) {
    rep.active_multipliers.push_back({k, sol.mu.at(k)});
  }
  for (std::size_t k = 0; k < program.problem.rows.size(); ++k) {
    if (program.problem.rows[k].is_neighbor()) {
      rep.max_neighbor_mu = std::max(rep.max_neighbor_mu, sol.mu.at(k));
    }
  }
  rep.force_balance_residual = force_balance_residual(program.problem, sol);
  rep.verdict = sol.status == QpStatus::optimal &&
                rep.u_star_norm <= thresholds.eps_u &&
                rep.v_norm <= thresholds.eps_v &&
                rep.goal_dist >= thresholds.eps_goal &&
                rep.max_neighbor_mu > thresholds.eps_mu;
  return rep;
}

inline std::vector<DeadlockReport> detect_all(
    const WorldState& world, const GoalSpec& goals,
    const std::vector<RobotProgram>& programs,
    const DeadlockThresholds& thresholds) {
  std::vector<DeadlockReport> out;
  for (std::size_t i = 0; i < world.size(); ++i) {
    out.push_back(detect_deadlock(i, world, goals, programs.at(i), thresholds));
  }
  return out;
}

/// Every robot deadlocked at once.
inline bool system_deadlock(const WorldState& world, const GoalSpec& goals,
                            const std::vector<RobotProgram>& programs,
                            const DeadlockThresholds& thresholds) {
  if (world.size() == 0) return false;
  const auto reports = detect_all(world, goals, programs, thresholds);
  return std::ranges::all_of(reports, [](const auto& r) { return r.verdict; });
}

/// Multiplier of a single active row: 2 (a^T u_hat - b_hat) / ||a||^2.
inline double two_robot_multiplier(const Vec2& a, const Vec2& u_hat, double b_hat) {
  const double nn = a.squaredNorm();
  if (nn == 0.0) throw InvalidArgument("multiplier undefined for a zero row");
  return 2.0 * (a.dot(u_hat) - b_hat) / nn;
}

/// Robots, goals and states of a constructed deadlock.
struct Configuration {
  WorldState world;
  GoalSpec goals;
};

/// Two robots at rest on the goal line, robot 0 at alpha pd0 + (1 - alpha) pd1
/// and robot 1 one margin behind it towards pd0.
inline WorldState collinear_family(const GoalSpec& goals, const Params& params,
                                   double alpha) {
  if (goals.size() != 2) throw InvalidArgument("collinear family needs two goals");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidArgument("family parameter must lie in (0, 1)");
  }
  const double dg = goals.distance(0, 1);
  if (!(dg > params.ds)) {
    throw InvalidArgument("goal separation must exceed the safety margin");
  }
  const Vec2 e_beta = goal_direction(goals, 0, 1);
  WorldState w;
  const Vec2 p0 = alpha * goals.pd[0] + (1.0 - alpha) * goals.pd[1];
  w.robots = {RobotState{p0, Vec2::Zero()},
              RobotState{p0 - params.ds * e_beta, Vec2::Zero()}};
  return w;
}

/// Closed-form multipliers of the collinear family: robot 0 and robot 1.
inline std::pair<double, double> collinear_family_multipliers(double kp, double ds,
                                                              double dg,
                                                              double alpha) {
  return {2.0 * kp * (1.0 - alpha) * dg / ds, 2.0 * kp * (alpha * dg + ds) / ds};
}

/// | ||p0 - pd0|| + ||p1 - pd1|| - (Ds + D_G) |; zero on the collinear family.
inline double boundedness_identity(const WorldState& world, const GoalSpec& goals,
                                   const Params& params) {
  if (world.size() != 2 || goals.size() != 2) {
    throw InvalidArgument("boundedness identity is defined for two robots");
  }
  const double lhs = (world.robots[0].p - goals.pd[0]).norm() +
                     (world.robots[1].p - goals.pd[1]).norm();
  return std::abs(lhs - (params.ds + goals.distance(0, 1)));
}

enum class Category { none, A, B };

struct ThreeRobotCategory {
  Category category = Category::none;
  std::size_t center = 0;  ///< robot shared by both tight pairs (category B)
  bool operator==(const ThreeRobotCategory&) const = default;
};

inline std::string to_string(const ThreeRobotCategory& c) {
  switch (c.category) {
    case Category::A: return "A";
    case Category::B: return "B(" + std::to_string(c.center) + ")";
    case Category::none: break;
  }
  return "none";
}

namespace detail {

inline ThreeRobotCategory category_from_edges(const std::array<bool, 3>& tight) {
  // tight[0] = (0,1), tight[1] = (0,2), tight[2] = (1,2)
  const int count = tight[0] + tight[1] + tight[2];
  if (count == 3) return {Category::A, 0};
  if (count == 2) {
    if (!tight[2]) return {Category::B, 0};
    if (!tight[1]) return {Category::B, 1};
    return {Category::B, 2};
  }
  return {};
}

}  // namespace detail

/// Category of a three-robot configuration from its pairwise distances.
inline ThreeRobotCategory classify_three_robot(const WorldState& world,
                                               const Params& params, double tol) {
  if (world.size() != 3) throw InvalidArgument("classification needs three robots");
  std::array<bool, 3> tight{};
  std::size_t k = 0;
  for (auto [i, j] : robot_pairs(3)) {
    const double d = (world.robots[i].p - world.robots[j].p).norm();
    if (d < params.ds - tol) {
      throw SafetyViolated(params.ds - d, "robots " + std::to_string(i) + " and " +
                                             std::to_string(j) +
                                             " are inside the safety margin");
    }
    tight[k++] = std::abs(d - params.ds) <= tol;
  }
  return detail::category_from_edges(tight);
}

/// Pairs (i, j) whose neighbor row carries a multiplier above eps_mu in
/// either robot's program.
inline std::vector<std::pair<std::size_t, std::size_t>> active_pairs(
    const std::vector<RobotProgram>& programs, double eps_mu) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (auto [i, j] : robot_pairs(programs.size())) {
    const double mi = programs[i].solution.mu.at(neighbor_row_index(i, j));
    const double mj = programs[j].solution.mu.at(neighbor_row_index(j, i));
    if (mi > eps_mu || mj > eps_mu) out.emplace_back(i, j);
  }
  return out;
}

/// Category of a three-robot deadlock from the pairs that push on each other.
inline ThreeRobotCategory classify_from_active_sets(
    const std::vector<RobotProgram>& programs, double eps_mu) {
  if (programs.size() != 3) throw InvalidArgument("classification needs three robots");
  std::array<bool, 3> tight{};
  for (auto [i, j] : active_pairs(programs, eps_mu)) {
    tight[i == 0 ? (j == 1 ? 0 : 1) : 2] = true;
  }
  return detail::category_from_edges(tight);
}

/// Goals R e_{2 pi i / 3} shared by the three-robot families.
inline GoalSpec triangle_goals(double radius) {
  GoalSpec g;
  for (int i = 0; i < 3; ++i) g.pd.push_back(radius * unit(2.0 * kPi * i / 3.0));
  return g;
}

/// Equilateral triangle of side Ds, each robot diametrically opposite its goal.
inline Configuration three_robot_family_catA(const Params& params, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("goal radius must be positive");
  Configuration c{{}, triangle_goals(radius)};
  for (int i = 0; i < 3; ++i) {
    const Vec2 p = params.ds / std::numbers::sqrt3 * unit(2.0 * kPi * i / 3.0 + kPi);
    c.world.robots.push_back({p, Vec2::Zero()});
  }
  return c;
}

/// Open 120 degree chain centred on robot 1 at the origin.
inline Configuration three_robot_family_catB(const Params& params, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("goal radius must be positive");
  Configuration c{{}, triangle_goals(radius)};
  c.world.robots = {RobotState{params.ds * unit(kPi), Vec2::Zero()},
                    RobotState{Vec2::Zero(), Vec2::Zero()},
                    RobotState{params.ds * unit(kPi / 3.0), Vec2::Zero()}};
  return c;
}

/// Two-parameter chain family: robot 1 at p0 + Ds e_theta, robot 2 at
/// p1 + Ds e_alpha, with theta in (-pi/6, 0) and alpha in (pi/6, pi/2).
inline Configuration catB_parametrized(const Params& params, double radius,
                                       double theta, double alpha) {
  if (!(radius > 0.0)) throw InvalidArgument("goal radius must be positive");
  if (!(theta > -kPi / 6.0 && theta < 0.0)) {
    throw InvalidArgument("theta must lie in (-pi/6, 0)");
  }
  if (!(alpha > kPi / 6.0 && alpha < kPi / 2.0)) {
    throw InvalidArgument("alpha must lie in (pi/6, pi/2)");
  }
  const double ds = params.ds;
  const double R = radius;
  const double s = std::sin(alpha - theta);
  const double pre = -1.0 / (2.0 * s);
  const double x = 2.0 * ds * std::cos(theta) * s +
                   2.0 * R * std::cos(theta) * std::sin(alpha - kPi / 3.0) +
                   2.0 * R * std::cos(alpha) * std::sin(theta);
  const double y = std::sin(theta) * (3.0 * R * std::sin(alpha) + 2.0 * ds * s -
                                      std::numbers::sqrt3 * R * std::cos(alpha));
  const Vec2 p0 = pre * Vec2(x, y);
  const Vec2 p1 = p0 + ds * unit(theta);
  const Vec2 p2 = p1 + ds * unit(alpha);
  Configuration c{{}, triangle_goals(radius)};
  c.world.robots = {RobotState{p0, Vec2::Zero()}, RobotState{p1, Vec2::Zero()},
                    RobotState{p2, Vec2::Zero()}};
  return c;
}

/// True when at least one pair pushes on each other and every such pair
/// sits on the margin: |h_ij| <= tol.
inline bool verify_boundary_membership(const WorldState& world, const Params& params,
                                       const std::vector<RobotProgram>& programs,
                                       double eps_mu, double tol) {
  const auto pairs = active_pairs(programs, eps_mu);
  if (pairs.empty()) return false;
  for (auto [i, j] : pairs) {
    try {
      if (std::abs(safety_index(world, i, j, params)) > tol) return false;
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

inline bool verify_boundary_membership(const WorldState& world, const GoalSpec& goals,
                                       const Params& params, double eps_mu,
                                       double tol) {
  return verify_boundary_membership(world, params, solve_all(world, goals, params),
                                    eps_mu, tol);
}

}  // namespace mrdl
