#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mrdl/io.hpp"
#include "mrdl/resolution.hpp"
#include "mrdl/scenarios.hpp"
#include "mrdl/sim.hpp"

using namespace mrdl;

namespace {

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

Scenario single_robot() {
  Scenario s;
  s.name = "single";
  s.params = Params::uniform(1.0, 3.0, 0.5, 5.0, 1);
  s.initial = {RobotState{Vec2(0.0, 0.0), Vec2::Zero()}};
  s.goals.pd = {Vec2(3.0, 4.0)};
  s.controller = ControllerKind::pd_only;
  s.apply_defaults();
  s.t_max = 10.0;
  return s;
}

StepRecord blank_record(std::size_t robots, double t) {
  StepRecord r;
  r.t = t;
  r.robots.assign(robots, RobotState{});
  r.u_star.assign(robots, Vec2::Zero());
  r.u_hat.assign(robots, Vec2::Zero());
  r.h.assign(robots * (robots - 1) / 2, 1.0);
  return r;
}

}  // namespace

TEST(IntegrateStep, SemiImplicitExample) {
  WorldState w{{{Vec2(1.0, 2.0), Vec2(0.5, -1.0)}}, 0.0};
  const auto n = integrate_step(w, {Vec2(2.0, 4.0)}, 0.1);
  EXPECT_NEAR(n.robots[0].v.x(), 0.7, 1e-15);
  EXPECT_NEAR(n.robots[0].v.y(), -0.6, 1e-15);
  EXPECT_NEAR(n.robots[0].p.x(), 1.07, 1e-15);
  EXPECT_NEAR(n.robots[0].p.y(), 1.94, 1e-15);
  EXPECT_NEAR(n.t, 0.1, 1e-15);
  EXPECT_THROW(integrate_step(w, {}, 0.1), InvalidArgument);
}

TEST(IntegrateStep, FirstOrderConvergenceOnParabola) {
  const Vec2 u(1.0, -2.0);
  auto error = [&](double dt) {
    WorldState w{{{Vec2::Zero(), Vec2(1.0, 0.0)}}, 0.0};
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < steps; ++k) w = integrate_step(w, {u}, dt);
    const Vec2 exact = Vec2(1.0, 0.0) + 0.5 * u;
    return (w.robots[0].p - exact).norm();
  };
  const double e1 = error(1e-2);
  const double e2 = error(5e-3);
  EXPECT_NEAR(e1 / e2, 2.0, 0.05);
}

TEST(Rk4Step, ExactForConstantControl) {
  const Vec2 u(1.0, -2.0);
  WorldState w{{{Vec2::Zero(), Vec2(1.0, 0.0)}}, 0.0};
  const ControlLaw law = [&](const WorldState&) { return std::vector<Vec2>{u}; };
  for (int k = 0; k < 100; ++k) w = rk4_step(w, law, 0.01);
  EXPECT_LE((w.robots[0].p - (Vec2(1.0, 0.0) + 0.5 * u)).norm(), 1e-13);
  EXPECT_NEAR(w.t, 1.0, 1e-12);
}

TEST(PdOnly, SingleRobotMatchesLinearSolution) {
  const auto sc = single_robot();
  const auto log = run_scenario(sc);
  const double dist = 5.0;
  const Vec2 dir = sc.goals.pd[0] / dist;
  double last_err = 1e9;
  for (const auto& r : log.records) {
    // From rest, the overdamped error decays monotonically along the goal line.
    const auto [x, v] = phase3_closed_form(r.t, 0.0, dist, 1.0, 3.0);
    EXPECT_NEAR(r.robots[0].p.dot(dir), x, 1e-9) << r.t;
    EXPECT_NEAR(r.robots[0].v.dot(dir), v, 1e-9) << r.t;
    const double err = (r.robots[0].p - sc.goals.pd[0]).norm();
    EXPECT_LE(err, last_err + 1e-15);
    last_err = err;
    EXPECT_EQ(r.phase, 0);
    EXPECT_FALSE(r.qp_solved());
  }
}

TEST(PdOnly, SingleRobotStopsAtGoal) {
  auto sc = single_robot();
  sc.t_max = 60.0;
  const auto log = run_scenario(sc);
  EXPECT_EQ(log.termination, "goal-reached");
  EXPECT_LE((log.records.back().robots[0].p - sc.goals.pd[0]).norm(), sc.goal_tol);
}

TEST(Csv, EmptyLogIsHeaderOnly) {
  TrajectoryLog log;
  log.robots = 3;
  std::ostringstream out;
  write_csv(out, log);
  EXPECT_EQ(out.str(), csv_header(3) + "\n");
  EXPECT_EQ(csv_header(3),
            "t,robot_id,px,py,vx,vy,ux_star,uy_star,ux_hat,uy_hat,phase,"
            "h_0_1,mu_0_1,h_0_2,mu_0_2,h_1_2,mu_1_2");
}

TEST(Csv, OneRowPerRobotPerStep) {
  TrajectoryLog log;
  log.robots = 3;
  for (int k = 0; k < 100; ++k) log.records.push_back(blank_record(3, k * 1e-3));
  std::ostringstream out;
  write_csv(out, log);
  EXPECT_EQ(count_lines(out.str()), 301u);
}

TEST(Csv, MultiplierColumnsFollowPairs) {
  auto sc = scenarios::head_on(ControllerKind::cbf_qp_only, 0.01);
  const auto log = run_scenario(sc);
  std::ostringstream out;
  write_csv(out, log);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  // 11 robot columns, then h_0_1 and mu_0_1.
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 12);
  EXPECT_NE(row.back(), ',');
}

TEST(Json, RoundTripPreservesLog) {
  const auto sc = scenarios::head_on(ControllerKind::three_phase, 6.0);
  const auto log = run_scenario(sc);
  const json j = log_to_json(log, sc);
  const TrajectoryLog back = log_from_json(json::parse(j.dump()));
  EXPECT_EQ(back, log);
  const Scenario sc_back = scenario_from_json(j.at("scenario"));
  EXPECT_EQ(scenario_to_json(sc_back), scenario_to_json(sc));
}

TEST(Json, MalformedInputIsRejected) {
  EXPECT_THROW(log_from_json(json::object()), InvalidArgument);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"robots": []})")), InvalidArgument);
  EXPECT_THROW(scenario_from_json(json::parse(
                   R"({"params": {"kp": 1, "kv": 3, "ds": 0.5, "alpha": 5},
                       "robots": [{"p": [0], "goal": [1, 1]}]})")),
               InvalidArgument);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), IoError);
}

TEST(Determinism, IdenticalRunsGiveIdenticalJson) {
  const auto sc = scenarios::head_on(ControllerKind::three_phase, 8.0);
  const std::string a = log_to_json(run_scenario(sc), sc).dump();
  const std::string b = log_to_json(run_scenario(sc), sc).dump();
  EXPECT_EQ(a, b);
}

TEST(Audit, AgreesWithInLoopValues) {
  const auto sc = scenarios::head_on(ControllerKind::cbf_qp_only, 8.0);
  const auto log = run_scenario(sc);
  const auto rep = audit_log(log, sc);
  EXPECT_EQ(rep.records, log.records.size());
  EXPECT_EQ(rep.qp_steps, log.records.size());
  EXPECT_EQ(rep.max_h_mismatch, 0.0);
  EXPECT_LE(rep.max_kkt_residual, 1e-8);
  EXPECT_LE(rep.max_resolve_mismatch, 1e-9);
  EXPECT_GE(rep.min_h, 0.0);
  EXPECT_TRUE(rep.ok(1e-3, 1e-8));
}

TEST(Audit, DetectsTamperedLog) {
  const auto sc = scenarios::head_on(ControllerKind::cbf_qp_only, 1.0);
  auto log = run_scenario(sc);
  log.records[10].h[0] += 1e-9;
  EXPECT_FALSE(audit_log(log, sc).ok(1e-3, 1e-8));
  log = run_scenario(sc);
  log.records[10].mu[0][0] += 1.0;
  EXPECT_FALSE(audit_log(log, sc).ok(1e-3, 1e-8));
}

TEST(Abort, PdOnlyCollisionCarriesPartialLog) {
  const auto sc = scenarios::head_on(ControllerKind::pd_only);
  try {
    run_scenario(sc);
    FAIL() << "expected a safety abort";
  } catch (const SimulationAborted& e) {
    EXPECT_EQ(e.kind(), "safety-violated");
    EXPECT_EQ(e.log().termination, "safety-violated");
    ASSERT_FALSE(e.log().records.empty());
    EXPECT_EQ(e.log().events.back().kind, "safety-violated");
  }
}

TEST(Validate, RejectsBadScenarios) {
  auto sc = scenarios::head_on(ControllerKind::three_phase);
  sc.initial[1].p = Vec2(-1.8, 0.0);
  EXPECT_THROW(sc.validate(), InvalidArgument);
  sc = scenarios::head_on(ControllerKind::three_phase);
  sc.params.kv = 1.0;
  EXPECT_THROW(sc.validate(), InvalidArgument);
  sc = scenarios::head_on(ControllerKind::three_phase);
  sc.dt = 0.0;
  EXPECT_THROW(sc.validate(), InvalidArgument);
  sc = scenarios::head_on(ControllerKind::three_phase);
  sc.goals.pd.pop_back();
  EXPECT_THROW(sc.validate(), InvalidArgument);
}

TEST(ScenarioFiles, AllShippedScenariosLoad) {
  for (const char* name : {"head_on_cbf", "head_on_three_phase", "category_a", "category_b",
                           "converging_three", "single_pd"}) {
    const auto sc = load_scenario(std::string(MRDL_SCENARIO_DIR) + "/" + name + ".json");
    EXPECT_NO_THROW(sc.validate()) << name;
    EXPECT_EQ(sc.dt, 1e-3) << name;
  }
}
