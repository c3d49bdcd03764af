#include <gtest/gtest.h>

#include <cmath>

#include "mrdl/deadlock.hpp"
#include "mrdl/scenarios.hpp"
#include "mrdl/sim.hpp"

using namespace mrdl;

namespace {

const Params kTwo = Params::uniform(1.0, 3.0, 0.5, 5.0, 2);
const Params kThree = Params::uniform(1.0, 3.0, 0.5, 5.0, 3);

GoalSpec line_goals() { return GoalSpec{{Vec2(-1.0, 0.0), Vec2(1.0, 0.0)}}; }

// Membership conditions of a constructed deadlock, checked robot by robot.
void expect_family_member(const Configuration& c, const Params& params) {
  const auto programs = solve_all(c.world, c.goals, params);
  const auto thresholds = DeadlockThresholds::defaults(params);
  for (std::size_t i = 0; i < c.world.size(); ++i) {
    const auto& sol = programs[i].solution;
    ASSERT_EQ(sol.status, QpStatus::optimal);
    EXPECT_LE(sol.u_star.norm(), 1e-8) << "robot " << i;
    EXPECT_LE(force_balance_residual(programs[i].problem, sol), 1e-8) << "robot " << i;
    EXPECT_GT((c.world.robots[i].p - c.goals.pd[i]).norm(), 0.0);
    bool any_neighbor = false;
    for (std::size_t k : sol.active_set) {
      if (programs[i].problem.rows[k].is_neighbor()) {
        EXPECT_GT(sol.mu[k], 0.0);
        any_neighbor = true;
      }
    }
    EXPECT_TRUE(any_neighbor);
  }
  EXPECT_TRUE(system_deadlock(c.world, c.goals, programs, thresholds));
  EXPECT_TRUE(verify_boundary_membership(c.world, params, programs, thresholds.eps_mu, 1e-8));
}

}  // namespace

TEST(DetectDeadlock, RobotAtGoalIsNotDeadlocked) {
  GoalSpec goals{{Vec2(0, 0), Vec2(3, 0)}};
  WorldState w{{RobotState{Vec2(0, 0), Vec2::Zero()}, RobotState{Vec2(3, 0), Vec2::Zero()}}, 0};
  const auto programs = solve_all(w, goals, kTwo);
  const auto rep = detect_deadlock(0, w, goals, programs[0], DeadlockThresholds::defaults(kTwo));
  EXPECT_FALSE(rep.verdict);
  EXPECT_EQ(rep.goal_dist, 0.0);
  EXPECT_FALSE(system_deadlock(w, goals, programs, DeadlockThresholds::defaults(kTwo)));
}

TEST(DetectDeadlock, MovingRobotIsNotDeadlocked) {
  GoalSpec goals{{Vec2(5, 0), Vec2(-5, 0)}};
  WorldState w{{RobotState{Vec2(-1, 0), Vec2(2, 0)}, RobotState{Vec2(1, 0), Vec2(-2, 0)}}, 0};
  const auto programs = solve_all(w, goals, kTwo);
  const auto rep = detect_deadlock(0, w, goals, programs[0], DeadlockThresholds::defaults(kTwo));
  EXPECT_FALSE(rep.verdict);
  EXPECT_DOUBLE_EQ(rep.v_norm, 2.0);
}

TEST(DetectDeadlock, CollinearPairIsDeadlocked) {
  const GoalSpec goals = line_goals();
  const WorldState w = collinear_family(goals, kTwo, 0.3);
  const auto programs = solve_all(w, goals, kTwo);
  const auto th = DeadlockThresholds::defaults(kTwo);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto rep = detect_deadlock(i, w, goals, programs[i], th);
    EXPECT_TRUE(rep.verdict) << "robot " << i;
    ASSERT_EQ(rep.active_multipliers.size(), 1u);
    EXPECT_EQ(rep.active_multipliers[0].row, 0u);
  }
  EXPECT_TRUE(system_deadlock(w, goals, programs, th));
}

TEST(SystemDeadlock, OneStuckRobotAmongMovingOnesIsNotSystemDeadlock) {
  GoalSpec goals{{Vec2(-1, 0), Vec2(1, 0), Vec2(0, 5)}};
  WorldState w = collinear_family(GoalSpec{{goals.pd[0], goals.pd[1]}}, kTwo, 0.5);
  w.robots.push_back({Vec2(0, -5), Vec2(0, 1)});
  const auto programs = solve_all(w, goals, kThree);
  const auto th = DeadlockThresholds::defaults(kThree);
  EXPECT_TRUE(detect_deadlock(0, w, goals, programs[0], th).verdict);
  EXPECT_FALSE(detect_deadlock(2, w, goals, programs[2], th).verdict);
  EXPECT_FALSE(system_deadlock(w, goals, programs, th));
}

TEST(TwoRobotMultiplier, Examples) {
  EXPECT_EQ(two_robot_multiplier(Vec2(1, 2), Vec2(1, 1), 3.0), 0.0);
  EXPECT_DOUBLE_EQ(two_robot_multiplier(Vec2(1, 0), Vec2(1, 0), 0.5), 1.0);
  EXPECT_THROW(two_robot_multiplier(Vec2(0, 0), Vec2(1, 0), 0.5), InvalidArgument);
}

TEST(CollinearFamily, MidpointExample) {
  const WorldState w = collinear_family(line_goals(), kTwo, 0.5);
  EXPECT_NEAR((w.robots[0].p - Vec2(0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((w.robots[1].p - Vec2(-0.5, 0)).norm(), 0.0, 1e-15);
  EXPECT_THROW(collinear_family(line_goals(), kTwo, 1.0), InvalidArgument);
  EXPECT_THROW(collinear_family(line_goals(), kTwo, 0.0), InvalidArgument);
}

TEST(CollinearFamily, MultipliersMatchClosedFormAndSolver) {
  // Goals off-axis so every vector component is exercised.
  const GoalSpec goals{{Vec2(0.3, -1.2), Vec2(2.1, 0.4)}};
  const double dg = goals.distance(0, 1);
  for (int k = 1; k <= 20; ++k) {
    const double alpha = k / 21.0;
    const WorldState w = collinear_family(goals, kTwo, alpha);
    EXPECT_NEAR((w.robots[0].p - w.robots[1].p).norm(), kTwo.ds, 1e-14);
    expect_family_member({w, goals}, kTwo);
    const auto programs = solve_all(w, goals, kTwo);
    const auto [mu0, mu1] = collinear_family_multipliers(kTwo.kp, kTwo.ds, dg, alpha);
    EXPECT_NEAR(programs[0].solution.mu[0], mu0, 1e-9 * (1 + mu0));
    EXPECT_NEAR(programs[1].solution.mu[0], mu1, 1e-9 * (1 + mu1));
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& row = programs[i].problem.rows[0];
      EXPECT_NEAR(two_robot_multiplier(row.a, programs[i].problem.u_hat, row.b_hat),
                  programs[i].solution.mu[0], 1e-8);
    }
    EXPECT_LE(boundedness_identity(w, goals, kTwo), 1e-12);
  }
}

TEST(BoundednessIdentity, PerturbedStateBreaksIt) {
  const GoalSpec goals = line_goals();
  WorldState w = collinear_family(goals, kTwo, 0.25);
  EXPECT_LE(boundedness_identity(w, goals, kTwo), 1e-12);
  EXPECT_LE(boundedness_identity(collinear_family(goals, kTwo, 0.75), goals, kTwo), 1e-12);
  w.robots[0].p.y() += 0.1;
  EXPECT_GT(boundedness_identity(w, goals, kTwo), 1e-3);
}

TEST(ClassifyThreeRobot, Categories) {
  const auto a = three_robot_family_catA(kThree, 2.0);
  EXPECT_EQ(classify_three_robot(a.world, kThree, 1e-9), (ThreeRobotCategory{Category::A, 0}));
  const auto b = three_robot_family_catB(kThree, 2.0);
  EXPECT_EQ(classify_three_robot(b.world, kThree, 1e-9), (ThreeRobotCategory{Category::B, 1}));
  WorldState far{{RobotState{Vec2(0, 0), {}}, RobotState{Vec2(1, 0), {}},
                  RobotState{Vec2(0.5, std::sqrt(3.0) / 2.0), {}}}, 0};
  EXPECT_EQ(classify_three_robot(far, kThree, 1e-9).category, Category::none);
  WorldState close{{RobotState{Vec2(0, 0), {}}, RobotState{Vec2(0.3, 0), {}},
                    RobotState{Vec2(5, 0), {}}}, 0};
  EXPECT_THROW(classify_three_robot(close, kThree, 1e-9), SafetyViolated);
}

TEST(ThreeRobotFamilies, EquilateralDeadlock) {
  for (double radius : {0.5, 1.0, 2.0, 7.5}) {
    const auto c = three_robot_family_catA(kThree, radius);
    for (auto [i, j] : robot_pairs(3)) {
      EXPECT_NEAR((c.world.robots[i].p - c.world.robots[j].p).norm(), kThree.ds, 1e-14);
    }
    expect_family_member(c, kThree);
    const auto programs = solve_all(c.world, c.goals, kThree);
    EXPECT_EQ(classify_from_active_sets(programs, 1e-6).category, Category::A);
    // Robot, goal and centroid (the origin) are collinear, robot opposite its goal.
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(cross(c.world.robots[i].p, c.goals.pd[i]), 0.0, 1e-14);
      EXPECT_LT(c.world.robots[i].p.dot(c.goals.pd[i]), 0.0);
    }
  }
}

TEST(ThreeRobotFamilies, ChainDeadlock) {
  for (double radius : {0.5, 2.0, 7.5}) {
    const auto c = three_robot_family_catB(kThree, radius);
    const auto& p = c.world.robots;
    EXPECT_NEAR((p[0].p - p[1].p).norm(), kThree.ds, 1e-15);
    EXPECT_NEAR((p[1].p - p[2].p).norm(), kThree.ds, 1e-15);
    EXPECT_NEAR((p[0].p - p[2].p).norm(), kThree.ds * std::sqrt(3.0), 1e-14);
    expect_family_member(c, kThree);
    const auto programs = solve_all(c.world, c.goals, kThree);
    auto neighbor_active = [&](std::size_t i) {
      int n = 0;
      for (std::size_t k : programs[i].solution.active_set) {
        n += programs[i].problem.rows[k].is_neighbor();
      }
      return n;
    };
    EXPECT_EQ(neighbor_active(0), 1);
    EXPECT_EQ(neighbor_active(1), 2);
    EXPECT_EQ(neighbor_active(2), 1);
    EXPECT_EQ(classify_from_active_sets(programs, 1e-6), (ThreeRobotCategory{Category::B, 1}));
  }
}

TEST(ThreeRobotFamilies, ParametrizedChainSweep) {
  constexpr int kGrid = 50;
  for (double radius : {1.0, 2.0}) {
    double min_outer = std::numeric_limits<double>::infinity();
    for (int a = 0; a < kGrid; ++a) {
      for (int b = 0; b < kGrid; ++b) {
        const double theta = -kPi / 6.0 + (a + 0.5) / kGrid * (kPi / 6.0);
        const double alpha = kPi / 6.0 + (b + 0.5) / kGrid * (kPi / 3.0);
        const auto c = catB_parametrized(kThree, radius, theta, alpha);
        const auto& p = c.world.robots;
        EXPECT_NEAR((p[0].p - p[1].p).norm(), kThree.ds, 1e-14);
        EXPECT_NEAR((p[1].p - p[2].p).norm(), kThree.ds, 1e-14);
        min_outer = std::min(min_outer, (p[0].p - p[2].p).norm());
        const auto programs = solve_all(c.world, c.goals, kThree);
        const auto thresholds = DeadlockThresholds::defaults(kThree);
        // Near alpha = pi/2 with small R the centre robot sits within the
        // goal threshold: still an equilibrium, but not reported as deadlock.
        bool clear_of_goals = true;
        for (std::size_t i = 0; i < 3; ++i) {
          clear_of_goals &= (p[i].p - c.goals.pd[i]).norm() >= thresholds.eps_goal;
        }
        if (clear_of_goals) {
          ASSERT_TRUE(system_deadlock(c.world, c.goals, programs, thresholds))
              << "R=" << radius << " theta=" << theta << " alpha=" << alpha;
        }
        for (const auto& prog : programs) {
          EXPECT_LE(prog.solution.u_star.norm(), 1e-8);
          EXPECT_LE(force_balance_residual(prog.problem, prog.solution), 1e-8);
        }
      }
    }
    EXPECT_GT(min_outer, kThree.ds);
  }
}

TEST(ThreeRobotFamilies, ParameterRangesEnforced) {
  EXPECT_THROW(catB_parametrized(kThree, 2.0, 0.1, 1.0), InvalidArgument);
  EXPECT_THROW(catB_parametrized(kThree, 2.0, -0.2, 0.2), InvalidArgument);
  EXPECT_THROW(three_robot_family_catA(kThree, 0.0), InvalidArgument);
}

TEST(BoundaryMembership, InteriorStateIsNotOnTheBoundary) {
  GoalSpec goals{{Vec2(3, 0), Vec2(-3, 0)}};
  WorldState w{{RobotState{Vec2(-0.375, 0), {}}, RobotState{Vec2(0.375, 0), {}}}, 0};
  EXPECT_FALSE(verify_boundary_membership(w, goals, kTwo, 1e-6, 1e-8));
  const auto c = three_robot_family_catA(kThree, 2.0);
  EXPECT_TRUE(verify_boundary_membership(c.world, c.goals, kThree, 1e-6, 1e-8));
  for (auto [i, j] : robot_pairs(3)) {
    EXPECT_LE(std::abs(safety_index(c.world, i, j, kThree)), 1e-8);
  }
}

// Whenever both robots of a simulated pair are flagged, they sit at the margin.
TEST(DeadlockGeometry, DetectedPairsSitAtTheMargin) {
  const auto s = scenarios::head_on(ControllerKind::cbf_qp_only, 12.0);
  const auto log = run_scenario(s);
  int flagged = 0;
  for (const auto& rec : log.records) {
    const WorldState w{rec.robots, rec.t};
    const auto programs = solve_all(w, s.goals, s.params);
    if (!system_deadlock(w, s.goals, programs, s.thresholds)) continue;
    ++flagged;
    const double gap = (rec.robots[0].p - rec.robots[1].p).norm() - s.params.ds;
    EXPECT_LE(std::abs(gap), 10.0 * s.thresholds.eps_v);
  }
  EXPECT_GT(flagged, 0);
}
