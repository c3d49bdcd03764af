#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mrdl/errors.hpp"

namespace mrdl {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;

/// Controller gains, safety margin and per-robot acceleration limits.
struct Params {
  double kp = 1.0;  ///< proportional gain (1/s^2)
  double kv = 3.0;  ///< derivative gain (1/s)
  double ds = 0.5;  ///< safety margin distance (m)
  /// Acceleration limit of each robot, applied per axis: |u_x|, |u_y| <= alpha_i.
  std::vector<double> alpha;

  static Params uniform(double kp, double kv, double ds, double alpha,
                        std::size_t robots) {
    return Params{kp, kv, ds, std::vector<double>(robots, alpha)};
  }

  bool overdamped() const { return kv * kv - 4.0 * kp > 0.0; }

  void validate(std::size_t robots) const {
    if (!(kp > 0.0) || !(kv > 0.0) || !(ds > 0.0)) {
      throw InvalidArgument("gains kp, kv and margin Ds must be positive");
    }
    if (alpha.size() != robots) {
      throw InvalidArgument("expected " + std::to_string(robots) +
                            " acceleration limits, got " +
                            std::to_string(alpha.size()));
    }
    for (double a : alpha) {
      if (!(a > 0.0)) throw InvalidArgument("acceleration limits must be positive");
    }
  }
};

/// Planar double-integrator state z = (p, v).
struct RobotState {
  Vec2 p = Vec2::Zero();
  Vec2 v = Vec2::Zero();

  bool operator==(const RobotState& o) const { return p == o.p && v == o.v; }
};

struct GoalSpec {
  std::vector<Vec2> pd;

  std::size_t size() const { return pd.size(); }

  /// Distance D_G between the goals of robots i and j.
  double distance(std::size_t i, std::size_t j) const {
    return (pd.at(j) - pd.at(i)).norm();
  }

  void validate(std::size_t robots) const {
    if (pd.size() != robots) {
      throw InvalidArgument("goal count does not match robot count");
    }
    for (std::size_t i = 0; i < pd.size(); ++i) {
      for (std::size_t j = i + 1; j < pd.size(); ++j) {
        if (distance(i, j) == 0.0) {
          throw InvalidArgument("robots " + std::to_string(i) + " and " +
                                std::to_string(j) + " share a goal");
        }
      }
    }
  }
};

struct WorldState {
  std::vector<RobotState> robots;
  double t = 0.0;

  std::size_t size() const { return robots.size(); }
};

/// A timestamped occurrence worth reporting (phase change, deadlock, abort).
struct Event {
  double t = 0.0;
  std::string kind;
  std::string detail;

  bool operator==(const Event&) const = default;
};

/// Normalizes an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// z-component of the planar cross product.
inline double cross(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// Counter-clockwise quarter turn.
inline Vec2 perp(const Vec2& a) { return {-a.y(), a.x()}; }

inline double bearing(const Vec2& a) { return std::atan2(a.y(), a.x()); }

/// Prescribed goal-stabilizing controller u_hat = -kp (p - pd) - kv v.
inline Vec2 pd_control(const RobotState& state, const Vec2& goal,
                       const Params& params) {
  return -params.kp * (state.p - goal) - params.kv * state.v;
}

/// Four-quadrant bearing of pd_j - pd_i.
inline double goal_bearing(const GoalSpec& goals, std::size_t i, std::size_t j) {
  const Vec2 d = goals.pd.at(j) - goals.pd.at(i);
  if (d.norm() == 0.0) {
    throw InvalidArgument("goal bearing undefined: coincident goals");
  }
  return bearing(d);
}

/// Unit vector along pd_j - pd_i.
inline Vec2 goal_direction(const GoalSpec& goals, std::size_t i, std::size_t j) {
  const Vec2 d = goals.pd.at(j) - goals.pd.at(i);
  const double n = d.norm();
  if (n == 0.0) throw InvalidArgument("goal direction undefined: coincident goals");
  return d / n;
}

/// Ascending list of unordered robot pairs (0,1), (0,2), ..., (1,2), ...
inline std::vector<std::pair<std::size_t, std::size_t>> robot_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

}  // namespace mrdl
