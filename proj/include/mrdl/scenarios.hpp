#pragma once

// Ready-made scenarios: the head-on swap and starts inside each analytical
// deadlock family.

#include <cstddef>
#include <string>
#include <utility>

#include "mrdl/core.hpp"
#include "mrdl/deadlock.hpp"
#include "mrdl/sim.hpp"

namespace mrdl::scenarios {

/// Gains and limits shared by the built-in scenarios.
inline Params desk_params(std::size_t robots) {
  return Params::uniform(1.0, 3.0, 0.5, 5.0, robots);
}

inline Scenario make(std::string name, const Params& params, const Configuration& c,
                     ControllerKind controller, double t_max) {
  Scenario s;
  s.name = std::move(name);
  s.params = params;
  s.initial = c.world.robots;
  s.goals = c.goals;
  s.controller = controller;
  s.apply_defaults();
  s.t_max = t_max;
  return s;
}

/// Two robots at (-2, 0) and (2, 0) swapping places.
inline Scenario head_on(ControllerKind controller, double t_max = 30.0) {
  Configuration c;
  c.world.robots = {RobotState{Vec2(-2.0, 0.0), Vec2::Zero()},
                    RobotState{Vec2(2.0, 0.0), Vec2::Zero()}};
  c.goals.pd = {Vec2(2.0, 0.0), Vec2(-2.0, 0.0)};
  return make("head-on", desk_params(2), c, controller, t_max);
}

/// Two robots at rest on the collinear family between goals (-1, 0), (1, 0).
inline Scenario collinear_start(double alpha, ControllerKind controller,
                                double t_max = 60.0) {
  const Params params = desk_params(2);
  Configuration c;
  c.goals.pd = {Vec2(-1.0, 0.0), Vec2(1.0, 0.0)};
  c.world = collinear_family(c.goals, params, alpha);
  return make("collinear", params, c, controller, t_max);
}

/// Three robots at rest in the equilateral deadlock, goals at radius R.
inline Scenario category_a(double radius, ControllerKind controller,
                           double t_max = 60.0) {
  const Params params = desk_params(3);
  return make("category-a", params, three_robot_family_catA(params, radius), controller,
              t_max);
}

/// Three robots at rest in the 120 degree chain deadlock, goals at radius R.
inline Scenario category_b(double radius, ControllerKind controller,
                           double t_max = 90.0) {
  const Params params = desk_params(3);
  return make("category-b", params, three_robot_family_catB(params, radius), controller,
              t_max);
}

}  // namespace mrdl::scenarios
