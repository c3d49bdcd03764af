#pragma once

// Closed-loop simulation of planar double integrators p' = v, v' = u under
// one of three controllers, with a per-step trajectory log.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrdl/cbf.hpp"
#include "mrdl/core.hpp"
#include "mrdl/deadlock.hpp"
#include "mrdl/errors.hpp"
#include "mrdl/resolution.hpp"

namespace mrdl {

enum class ControllerKind { cbf_qp_only, three_phase, pd_only };

enum class Integrator { rk4, semi_implicit_euler };

inline std::string to_string(ControllerKind c) {
  switch (c) {
    case ControllerKind::cbf_qp_only: return "cbf-qp-only";
    case ControllerKind::three_phase: return "three-phase";
    case ControllerKind::pd_only: return "pd-only";
  }
  return "unknown";
}

inline std::string to_string(Integrator i) {
  return i == Integrator::rk4 ? "rk4" : "semi-implicit-euler";
}

struct Scenario {
  std::string name = "scenario";
  Params params;
  std::vector<RobotState> initial;
  GoalSpec goals;
  ControllerKind controller = ControllerKind::three_phase;
  Integrator integrator = Integrator::rk4;
  double dt = 1e-3;
  double t_max = 30.0;
  DeadlockThresholds thresholds;
  ResolutionConfig resolution;
  double goal_tol = 0.05;     ///< run stops once every robot is this close to its goal
  double safety_tol = 5e-4;   ///< run aborts when a pair is closer than Ds - safety_tol
  std::uint64_t seed = 0;     ///< recorded only; the simulation is deterministic

  std::size_t size() const { return initial.size(); }

  /// Fills thresholds, resolution gains and tolerances from the parameters.
  void apply_defaults() {
    thresholds = DeadlockThresholds::defaults(params);
    resolution = ResolutionConfig::defaults(params);
    goal_tol = thresholds.eps_goal;
    safety_tol = 1e-3 * params.ds;
  }

  void validate() const {
    const std::size_t n = size();
    if (n == 0) throw InvalidArgument("scenario has no robots");
    params.validate(n);
    goals.validate(n);
    thresholds.validate();
    resolution.validate();
    if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
    if (!(t_max > dt)) throw InvalidArgument("horizon must exceed the time step");
    if (!(goal_tol > 0.0) || !(safety_tol >= 0.0)) {
      throw InvalidArgument("goal and safety tolerances must be positive");
    }
    if (controller == ControllerKind::three_phase && !params.overdamped()) {
      throw InvalidArgument("three-phase control needs overdamped gains (kv^2 > 4 kp)");
    }
    for (const auto& r : initial) {
      if (!r.p.allFinite() || !r.v.allFinite()) {
        throw InvalidArgument("initial states must be finite");
      }
    }
    for (auto [i, j] : robot_pairs(n)) {
      const double d = (initial[i].p - initial[j].p).norm();
      if (d <= params.ds - kBoundaryBand) {
        throw InvalidArgument("robots " + std::to_string(i) + " and " +
                              std::to_string(j) + " start inside the safety margin");
      }
    }
  }
};

/// Everything logged at one time step, before the step is integrated.
struct StepRecord {
  double t = 0.0;
  int phase = 1;  ///< 1, 2, 3; 0 under pd-only control
  std::vector<RobotState> robots;
  std::vector<Vec2> u_star;  ///< control applied over the step
  std::vector<Vec2> u_hat;   ///< PD reference
  std::vector<double> h;     ///< per pair in robot_pairs order
  /// Per robot, the multiplier of every row of its program; empty when no
  /// program was solved at this step.
  std::vector<std::vector<double>> mu;
  std::vector<std::vector<std::size_t>> active;

  bool qp_solved() const { return !mu.empty(); }

  /// Multiplier of robot r's row for neighbor `other`.
  std::optional<double> neighbor_mu(std::size_t r, std::size_t other) const {
    if (!qp_solved()) return std::nullopt;
    return mu.at(r).at(neighbor_row_index(r, other));
  }

  bool operator==(const StepRecord&) const = default;
};

struct TrajectoryLog {
  std::size_t robots = 0;
  std::vector<StepRecord> records;
  std::vector<Event> events;
  std::string termination;  ///< "goal-reached", "t-max" or the abort kind

  bool operator==(const TrajectoryLog&) const = default;
};

/// Raised when a run is cut short; carries the log up to the failure.
class SimulationAborted : public Error {
 public:
  SimulationAborted(const std::string& kind, const std::string& what, TrajectoryLog log)
      : Error(kind, what), log_(std::move(log)) {}

  const TrajectoryLog& log() const noexcept { return log_; }

 private:
  TrajectoryLog log_;
};

/// Semi-implicit Euler: v+ = v + u dt, p+ = p + v+ dt.
inline WorldState integrate_step(const WorldState& world, const std::vector<Vec2>& controls,
                                 double dt) {
  if (controls.size() != world.size()) {
    throw InvalidArgument("one control per robot expected");
  }
  WorldState next = world;
  for (std::size_t i = 0; i < world.size(); ++i) {
    next.robots[i].v = world.robots[i].v + controls[i] * dt;
    next.robots[i].p = world.robots[i].p + next.robots[i].v * dt;
  }
  next.t = world.t + dt;
  return next;
}

using ControlLaw = std::function<std::vector<Vec2>(const WorldState&)>;

/// Classical fourth-order Runge-Kutta step of the closed loop; `law` is
/// re-evaluated at every stage. `u0`, if given, is the law at `world`.
inline WorldState rk4_step(const WorldState& world, const ControlLaw& law, double dt,
                           const std::vector<Vec2>* u0 = nullptr) {
  const std::size_t n = world.size();
  struct Deriv {
    std::vector<Vec2> dp, dv;
  };
  auto deriv = [&](const WorldState& w, const std::vector<Vec2>& u) {
    Deriv d{std::vector<Vec2>(n), u};
    for (std::size_t i = 0; i < n; ++i) d.dp[i] = w.robots[i].v;
    return d;
  };
  auto shifted = [&](const Deriv& d, double h) {
    WorldState w = world;
    for (std::size_t i = 0; i < n; ++i) {
      w.robots[i].p += h * d.dp[i];
      w.robots[i].v += h * d.dv[i];
    }
    w.t = world.t + h;
    return w;
  };
  const Deriv k1 = deriv(world, u0 ? *u0 : law(world));
  const WorldState w2 = shifted(k1, 0.5 * dt);
  const Deriv k2 = deriv(w2, law(w2));
  const WorldState w3 = shifted(k2, 0.5 * dt);
  const Deriv k3 = deriv(w3, law(w3));
  const WorldState w4 = shifted(k3, dt);
  const Deriv k4 = deriv(w4, law(w4));
  WorldState next = world;
  for (std::size_t i = 0; i < n; ++i) {
    next.robots[i].p += dt / 6.0 * (k1.dp[i] + 2.0 * k2.dp[i] + 2.0 * k3.dp[i] + k4.dp[i]);
    next.robots[i].v += dt / 6.0 * (k1.dv[i] + 2.0 * k2.dv[i] + 2.0 * k3.dv[i] + k4.dv[i]);
  }
  next.t = world.t + dt;
  return next;
}

/// Smallest pairwise distance and the pair attaining it.
inline std::pair<double, std::pair<std::size_t, std::size_t>> min_pair_distance(
    const WorldState& world) {
  double best = std::numeric_limits<double>::infinity();
  std::pair<std::size_t, std::size_t> arg{0, 0};
  for (auto [i, j] : robot_pairs(world.size())) {
    const double d = (world.robots[i].p - world.robots[j].p).norm();
    if (d < best) {
      best = d;
      arg = {i, j};
    }
  }
  return {best, arg};
}

namespace detail {

inline StepRecord make_record(const WorldState& world, const GoalSpec& goals,
                              const Params& params, int phase,
                              const std::vector<Vec2>& controls,
                              const std::vector<RobotProgram>& programs) {
  StepRecord rec;
  rec.t = world.t;
  rec.phase = phase;
  rec.robots = world.robots;
  rec.u_star = controls;
  for (std::size_t i = 0; i < world.size(); ++i) {
    rec.u_hat.push_back(pd_control(world.robots[i], goals.pd[i], params));
  }
  for (auto [i, j] : robot_pairs(world.size())) {
    rec.h.push_back(signed_safety_index(world, i, j, params));
  }
  for (const auto& p : programs) {
    rec.mu.push_back(p.solution.mu);
    rec.active.push_back(p.solution.active_set);
  }
  return rec;
}

inline bool all_at_goal(const WorldState& world, const GoalSpec& goals, double tol) {
  for (std::size_t i = 0; i < world.size(); ++i) {
    if ((world.robots[i].p - goals.pd[i]).norm() > tol) return false;
  }
  return true;
}

}  // namespace detail

/// Simulates `scenario` until every robot is within goal_tol of its goal or
/// t_max is reached. Throws SimulationAborted (carrying the partial log) on
/// an infeasible program or a safety-margin violation.
inline TrajectoryLog run_scenario(const Scenario& scenario) {
  scenario.validate();
  const auto& params = scenario.params;
  const auto& goals = scenario.goals;
  ResolutionConfig config = scenario.resolution;
  config.resolve = scenario.controller == ControllerKind::three_phase;

  TrajectoryLog log;
  log.robots = scenario.size();
  WorldState world{scenario.initial, 0.0};
  PhaseState state;
  const bool pd_only = scenario.controller == ControllerKind::pd_only;
  if (pd_only) state.phase = Phase::three;

  const auto steps = static_cast<std::int64_t>(std::floor(scenario.t_max / scenario.dt + 1e-9));
  for (std::int64_t k = 0;; ++k) {
    world.t = static_cast<double>(k) * scenario.dt;
    try {
      const auto [dmin, pair] = min_pair_distance(world);
      if (world.size() > 1 && dmin < params.ds - scenario.safety_tol) {
        throw SafetyViolated(params.ds - dmin,
                             "robots " + std::to_string(pair.first) + " and " +
                                 std::to_string(pair.second) + " at distance " +
                                 std::to_string(dmin) + " inside the margin");
      }
      SupervisorStep step;
      if (pd_only) {
        step.next = state;
        step.controls = phase_controls(state, world, goals, params, config).u;
      } else {
        step = supervisor_step(state, world, goals, params, scenario.thresholds, config);
      }
      log.events.insert(log.events.end(), step.events.begin(), step.events.end());
      const int phase = pd_only ? 0 : static_cast<int>(step.next.phase);
      const auto& programs =
          step.next.phase == Phase::one ? step.programs : std::vector<RobotProgram>{};
      log.records.push_back(
          detail::make_record(world, goals, params, phase, step.controls, programs));
      state = step.next;

      if (detail::all_at_goal(world, goals, scenario.goal_tol)) {
        log.events.push_back({world.t, "goal-reached", ""});
        log.termination = "goal-reached";
        return log;
      }
      if (k >= steps) {
        log.termination = "t-max";
        return log;
      }
      if (scenario.integrator == Integrator::semi_implicit_euler) {
        world = integrate_step(world, step.controls, scenario.dt);
      } else {
        const ControlLaw law = [&](const WorldState& w) {
          return phase_controls(state, w, goals, params, config).u;
        };
        world = rk4_step(world, law, scenario.dt, &step.controls);
      }
    } catch (const Error& e) {
      log.events.push_back({world.t, e.kind(), e.what()});
      log.termination = e.kind();
      throw SimulationAborted(e.kind(), e.what(), std::move(log));
    }
  }
}

}  // namespace mrdl
