#pragma once

// Three-phase deadlock resolution.
//
//   Phase one   - every robot applies its safety-filtered control u*.
//   Phase two   - once a system deadlock has persisted, the deadlocked
//                 assembly is rotated rigidly at constant pairwise distance
//                 until it is aligned with its goals.
//   Phase three - every robot applies its plain PD control.
//
// Phase two uses feedback linearization. For a pair with relative position
// delta = p_1 - p_0 the outputs are y1 = d/dt (r^2 / 2) = delta . dv and
// y2 = theta_dot with theta the bearing of delta. The controls impose
//
//   dy1/dt = -k1 y1,    d(theta_dot)/dt = -kp (theta - beta) - kv theta_dot.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mrdl/core.hpp"
#include "mrdl/deadlock.hpp"
#include "mrdl/errors.hpp"
#include "mrdl/qp.hpp"

namespace mrdl {

enum class Phase { one = 1, two = 2, three = 3 };

/// How the assembly is driven during phase two.
enum class RotationMode {
  none,        ///< not in phase two
  pair,        ///< two robots rotating about their midpoint
  regularize,  ///< open three-robot chain closing into a triangle
  rigid,       ///< three robots rotating rigidly about their centroid
};

inline std::string to_string(RotationMode m) {
  switch (m) {
    case RotationMode::pair: return "pair";
    case RotationMode::regularize: return "regularize";
    case RotationMode::rigid: return "rigid";
    case RotationMode::none: break;
  }
  return "none";
}

struct ResolutionConfig {
  bool resolve = true;       ///< false: detect deadlocks but never leave phase one
  double k1 = 30.0;          ///< distance-hold gain
  double eps_theta = 1e-3;   ///< alignment tolerance (rad)
  double eps_omega = 1e-3;   ///< angular-rate tolerance (rad/s)

  static ResolutionConfig defaults(const Params& params) {
    ResolutionConfig c;
    c.k1 = 10.0 * params.kv;
    return c;
  }

  void validate() const {
    if (!(k1 > 0.0) || !(eps_theta > 0.0) || !(eps_omega > 0.0)) {
      throw InvalidArgument("resolution gains and tolerances must be positive");
    }
  }
};

struct PhaseState {
  Phase phase = Phase::one;
  int persist_counter = 0;
  double t_enter_phase = 0.0;
  std::optional<double> t_deadlock;  ///< first time a system deadlock was declared
  std::optional<double> beta_ref;    ///< set once, when phase two starts
  RotationMode mode = RotationMode::none;
  /// Robots in the order the phase-two controller uses them:
  /// pair {0, 1}; regularize {centre, outer, outer}; rigid {reference, ., .}.
  std::vector<std::size_t> rotation_partner_map;
  std::array<double, 2> regularize_targets{};  ///< outer bearings about the centre
  std::optional<ThreeRobotCategory> category;
};

/// Outputs of the pair feedback linearization.
struct FeedbackLinState {
  double theta = 0.0;      ///< bearing of p_j - p_i
  double theta_dot = 0.0;  ///< cross(delta, dv) / r^2
  double R_half = 0.0;     ///< r^2 / 2
  double y_o1 = 0.0;       ///< delta . dv = dR/dt
};

inline FeedbackLinState feedback_lin_state(const RobotState& zi, const RobotState& zj) {
  const Vec2 d = zj.p - zi.p;
  const Vec2 dv = zj.v - zi.v;
  const double r2 = d.squaredNorm();
  if (r2 == 0.0) throw CoincidentRobots("feedback linearization needs distinct robots");
  return {bearing(d), cross(d, dv) / r2, 0.5 * r2, d.dot(dv)};
}

namespace detail {

/// Relative control du = u_j - u_i that imposes the pair output dynamics
/// with target bearing `target`.
inline Vec2 relative_control(const RobotState& zi, const RobotState& zj, double target,
                             const Params& params, double k1) {
  const Vec2 d = zj.p - zi.p;
  const Vec2 dv = zj.v - zi.v;
  const auto s = feedback_lin_state(zi, zj);
  const double e = wrap_angle(s.theta - target);
  const double r2 = 2.0 * s.R_half;
  // d . du = b1 and cross(d, du) = b2.
  const double b1 = -k1 * s.y_o1 - dv.squaredNorm();
  const double b2 = 2.0 * s.y_o1 * s.theta_dot -
                    r2 * (params.kp * e + params.kv * s.theta_dot);
  Eigen::Matrix2d M;
  M << d.x(), d.y(), -d.y(), d.x();
  return M.partialPivLu().solve(Vec2(b1, b2));
}

}  // namespace detail

/// Pair rotation. Returns (u_0, u_1) with u_1 = -u_0 so the midpoint stays
/// put; u_0 solves A u_0 = b with A = [[-2 dx, -2 dy], [2 dy, -2 dx]].
inline std::pair<Vec2, Vec2> phase2_control_two(const WorldState& world,
                                                const Params& params, double beta_ref,
                                                double k1) {
  if (world.size() != 2) throw InvalidArgument("pair rotation needs two robots");
  const Vec2 du = detail::relative_control(world.robots[0], world.robots[1], beta_ref,
                                           params, k1);
  // du = u_1 - u_0 = -2 u_0.
  const Vec2 u0 = -0.5 * du;
  return {u0, -u0};
}

/// Bearing of robot `ref` about the centroid, its rate, and the rigid-motion
/// quantities every robot needs.
struct RigidState {
  Vec2 centroid = Vec2::Zero();
  Vec2 centroid_velocity = Vec2::Zero();
  double theta = 0.0;
  double theta_dot = 0.0;
};

inline RigidState rigid_state(const WorldState& world, std::size_t ref) {
  RigidState s;
  const double n = static_cast<double>(world.size());
  for (const auto& r : world.robots) {
    s.centroid += r.p / n;
    s.centroid_velocity += r.v / n;
  }
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : world.robots) {
    const Vec2 q = r.p - s.centroid;
    num += cross(q, r.v - s.centroid_velocity);
    den += q.squaredNorm();
  }
  if (den == 0.0) throw CoincidentRobots("all robots sit on their centroid");
  const Vec2 q_ref = world.robots.at(ref).p - s.centroid;
  if (q_ref.norm() == 0.0) throw CoincidentRobots("reference robot sits on the centroid");
  s.theta = bearing(q_ref);
  s.theta_dot = num / den;
  return s;
}

/// Target bearing of robot `ref` that best aligns the assembly with its
/// goals: rotation angle atan2(sum cross(q, g), sum q . g) about the centroid.
inline double rigid_alignment_target(const WorldState& world, const GoalSpec& goals,
                                     std::size_t ref) {
  const auto s = rigid_state(world, ref);
  double c = 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < world.size(); ++i) {
    const Vec2 q = world.robots[i].p - s.centroid;
    const Vec2 g = goals.pd.at(i) - s.centroid;
    c += cross(q, g);
    d += q.dot(g);
  }
  return wrap_angle(s.theta + std::atan2(c, d));
}

/// Rigid rotation of the whole assembly about its (static) centroid:
/// u_i = theta_ddot perp(q_i) - theta_dot^2 q_i - k1 (w_i - theta_dot perp(q_i)),
/// theta_ddot = -kp (theta - beta) - kv theta_dot. The controls sum to zero.
inline std::vector<Vec2> phase2_control_three(const WorldState& world,
                                              const Params& params, double beta_ref,
                                              double k1, std::size_t ref = 0) {
  if (world.size() < 2) throw InvalidArgument("rigid rotation needs at least two robots");
  const auto s = rigid_state(world, ref);
  const double e = wrap_angle(s.theta - beta_ref);
  const double theta_ddot = -params.kp * e - params.kv * s.theta_dot;
  std::vector<Vec2> u;
  for (const auto& r : world.robots) {
    const Vec2 q = r.p - s.centroid;
    const Vec2 w = r.v - s.centroid_velocity;
    u.push_back(theta_ddot * perp(q) - s.theta_dot * s.theta_dot * q -
                k1 * (w - s.theta_dot * perp(q)));
  }
  return u;
}

/// Closes an open chain (centre c, outer robots a and b at the margin from
/// c) into a triangle: c is damped to rest and each outer robot orbits c at
/// constant distance towards its target bearing.
inline std::vector<Vec2> regularization_controls(const WorldState& world,
                                                 const Params& params,
                                                 const PhaseState& state, double k1) {
  const auto& map = state.rotation_partner_map;
  if (world.size() != 3 || map.size() != 3) {
    throw InvalidArgument("regularization needs a three-robot chain");
  }
  std::vector<Vec2> u(3, Vec2::Zero());
  const auto& centre = world.robots[map[0]];
  const Vec2 u_centre = -k1 * centre.v;
  u[map[0]] = u_centre;
  for (std::size_t k = 1; k < 3; ++k) {
    const Vec2 du = detail::relative_control(centre, world.robots[map[k]],
                                             state.regularize_targets[k - 1], params, k1);
    u[map[k]] = u_centre + du;
  }
  return u;
}

/// Relative coordinates in the goal frame after phase two:
///   x(tau) = c1 e^{w1 tau} + c2 e^{w2 tau} + D_G,  dx/dt likewise,
/// with w_{1,2} = (-kv +- sqrt(kv^2 - 4 kp)) / 2 and x(0) = Ds, dx/dt(0) = 0.
inline std::pair<double, double> phase3_closed_form(double tau, double ds, double dg,
                                                    double kp, double kv) {
  const double disc = kv * kv - 4.0 * kp;
  if (!(disc > 0.0)) throw InvalidArgument("closed form needs overdamped gains");
  if (!(dg > ds)) throw InvalidArgument("closed form needs D_G > Ds");
  if (tau < 0.0) throw InvalidArgument("closed form is defined for tau >= 0");
  const double root = std::sqrt(disc);
  const double w1 = 0.5 * (-kv + root);
  const double w2 = 0.5 * (-kv - root);
  const double c1 = w2 * (dg - ds) / (w1 - w2);
  const double c2 = -w1 * (dg - ds) / (w1 - w2);
  const double e1 = std::exp(w1 * tau);
  const double e2 = std::exp(w2 * tau);
  return {c1 * e1 + c2 * e2 + dg, c1 * w1 * e1 + c2 * w2 * e2};
}

/// Rotation by -beta.
inline Vec2 rotate_frame(const Vec2& v, double beta) {
  const double c = std::cos(beta);
  const double s = std::sin(beta);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y()};
}

/// Throws QpInfeasible when any robot's program is empty.
inline void require_feasible(const std::vector<RobotProgram>& programs) {
  for (std::size_t i = 0; i < programs.size(); ++i) {
    const auto& sol = programs[i].solution;
    if (sol.status == QpStatus::infeasible) {
      throw QpInfeasible("program of robot " + std::to_string(i) +
                         " is infeasible (phase-one slack " +
                         std::to_string(sol.phase_one_slack) + ")");
    }
  }
}

struct ControlEvaluation {
  std::vector<Vec2> u;
  std::vector<RobotProgram> programs;  ///< filled in phase one only
};

/// Controls of the current phase at `world`, without changing the phase.
/// Pure, so an integrator may call it at intermediate stages.
inline ControlEvaluation phase_controls(const PhaseState& state, const WorldState& world,
                                        const GoalSpec& goals, const Params& params,
                                        const ResolutionConfig& config) {
  ControlEvaluation out;
  switch (state.phase) {
    case Phase::one: {
      out.programs = solve_all(world, goals, params);
      require_feasible(out.programs);
      for (const auto& p : out.programs) out.u.push_back(p.solution.u_star);
      return out;
    }
    case Phase::two: {
      const double beta = state.beta_ref.value_or(0.0);
      switch (state.mode) {
        case RotationMode::pair: {
          auto [u0, u1] = phase2_control_two(world, params, beta, config.k1);
          out.u = {u0, u1};
          return out;
        }
        case RotationMode::regularize:
          out.u = regularization_controls(world, params, state, config.k1);
          return out;
        case RotationMode::rigid:
          out.u = phase2_control_three(world, params, beta, config.k1,
                                       state.rotation_partner_map.at(0));
          return out;
        case RotationMode::none: break;
      }
      throw InvalidArgument("phase two without a rotation mode");
    }
    case Phase::three:
      for (std::size_t i = 0; i < world.size(); ++i) {
        out.u.push_back(pd_control(world.robots[i], goals.pd.at(i), params));
      }
      return out;
  }
  throw InvalidArgument("unknown phase");
}

struct SupervisorStep {
  std::vector<Vec2> controls;
  PhaseState next;
  std::vector<RobotProgram> programs;  ///< phase-one programs at this step
  std::vector<Event> events;
};

namespace detail {

inline std::string phase_event(Phase from, Phase to, const std::string& extra) {
  std::string s = std::to_string(static_cast<int>(from)) + "->" +
                  std::to_string(static_cast<int>(to));
  return extra.empty() ? s : s + " " + extra;
}

inline bool outer_aligned(const WorldState& world, const PhaseState& s,
                          const ResolutionConfig& config) {
  const auto& centre = world.robots[s.rotation_partner_map[0]];
  for (std::size_t k = 1; k < 3; ++k) {
    const auto fl = feedback_lin_state(centre, world.robots[s.rotation_partner_map[k]]);
    if (std::abs(wrap_angle(fl.theta - s.regularize_targets[k - 1])) > config.eps_theta ||
        std::abs(fl.theta_dot) > config.eps_omega) {
      return false;
    }
  }
  return true;
}

/// Enters phase two from a declared deadlock; returns the event detail.
inline std::string enter_phase_two(PhaseState& s, const WorldState& world,
                                   const GoalSpec& goals,
                                   const std::vector<RobotProgram>& programs,
                                   const DeadlockThresholds& thresholds) {
  if (world.size() == 2) {
    s.mode = RotationMode::pair;
    s.rotation_partner_map = {0, 1};
    s.beta_ref = goal_bearing(goals, 0, 1);
    return "mode=pair beta=" + std::to_string(*s.beta_ref);
  }
  const auto cat = classify_from_active_sets(programs, thresholds.eps_mu);
  s.category = cat;
  if (cat.category == Category::B) {
    const std::size_t c = cat.center;
    std::vector<std::size_t> outer;
    for (std::size_t i = 0; i < 3; ++i) {
      if (i != c) outer.push_back(i);
    }
    const double fa = bearing(world.robots[outer[0]].p - world.robots[c].p);
    const double fb = bearing(world.robots[outer[1]].p - world.robots[c].p);
    const double gap = wrap_angle(fb - fa);
    const double mid = fa + 0.5 * gap;
    const double half = std::copysign(kPi / 6.0, gap);
    s.mode = RotationMode::regularize;
    s.rotation_partner_map = {c, outer[0], outer[1]};
    s.regularize_targets = {wrap_angle(mid - half), wrap_angle(mid + half)};
    return "mode=regularize category=" + to_string(cat);
  }
  s.mode = RotationMode::rigid;
  s.rotation_partner_map = {0, 1, 2};
  s.beta_ref = rigid_alignment_target(world, goals, 0);
  return "mode=rigid category=" + to_string(cat) + " beta=" + std::to_string(*s.beta_ref);
}

}  // namespace detail

/// Advances the supervisor by one step at `world` and returns the controls
/// to apply over that step.
inline SupervisorStep supervisor_step(const PhaseState& state, const WorldState& world,
                                      const GoalSpec& goals, const Params& params,
                                      const DeadlockThresholds& thresholds,
                                      const ResolutionConfig& config) {
  SupervisorStep out;
  out.next = state;
  PhaseState& s = out.next;
  const double t = world.t;

  if (s.phase == Phase::one) {
    out.programs = solve_all(world, goals, params);
    require_feasible(out.programs);
    if (system_deadlock(world, goals, out.programs, thresholds)) {
      ++s.persist_counter;
    } else {
      s.persist_counter = 0;
    }
    if (s.persist_counter >= thresholds.persist_steps && !s.t_deadlock) {
      s.t_deadlock = t;
      out.events.push_back({t, "deadlock", "system deadlock of " +
                                               std::to_string(world.size()) + " robots"});
    }
    const bool resolvable = world.size() == 2 || world.size() == 3;
    if (s.t_deadlock && config.resolve && resolvable) {
      const std::string detail =
          detail::enter_phase_two(s, world, goals, out.programs, thresholds);
      s.phase = Phase::two;
      s.t_enter_phase = t;
      out.events.push_back({t, "phase", detail::phase_event(Phase::one, Phase::two, detail)});
    }
  } else if (s.phase == Phase::two) {
    if (s.mode == RotationMode::regularize) {
      if (detail::outer_aligned(world, s, config)) {
        s.mode = RotationMode::rigid;
        s.rotation_partner_map = {0, 1, 2};
        s.beta_ref = rigid_alignment_target(world, goals, 0);
        out.events.push_back({t, "regularized", "beta=" + std::to_string(*s.beta_ref)});
      }
    } else {
      double theta = 0.0;
      double theta_dot = 0.0;
      if (s.mode == RotationMode::pair) {
        const auto fl = feedback_lin_state(world.robots[0], world.robots[1]);
        theta = fl.theta;
        theta_dot = fl.theta_dot;
      } else {
        const auto rs = rigid_state(world, s.rotation_partner_map.at(0));
        theta = rs.theta;
        theta_dot = rs.theta_dot;
      }
      if (std::abs(wrap_angle(theta - *s.beta_ref)) <= config.eps_theta &&
          std::abs(theta_dot) <= config.eps_omega) {
        s.phase = Phase::three;
        s.t_enter_phase = t;
        s.mode = RotationMode::none;
        out.events.push_back({t, "phase", detail::phase_event(Phase::two, Phase::three, "")});
      }
    }
  }

  if (s.phase == Phase::one) {
    for (const auto& p : out.programs) out.controls.push_back(p.solution.u_star);
  } else {
    out.controls = phase_controls(s, world, goals, params, config).u;
  }
  return out;
}

}  // namespace mrdl
