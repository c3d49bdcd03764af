// Command-line front end: simulate scenarios, print constructed deadlocks,
// run the admissible-configuration census and audit logs.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mrdl/mrdl.hpp"

namespace {

using namespace mrdl;

void print_vec(std::ostream& os, const Vec2& v) {
  os << "(" << v.x() << ", " << v.y() << ")";
}

int cmd_run(const std::string& path, const std::string& out, const std::string& format) {
  const Scenario scenario = load_scenario(path);
  TrajectoryLog log;
  int code = 0;
  try {
    log = run_scenario(scenario);
  } catch (const SimulationAborted& e) {
    log = e.log();
    std::cerr << "error[" << e.kind() << "]: " << e.what() << "\n";
    code = 2;
  }
  if (!out.empty()) export_log(log, scenario, log_format_from_string(format), out);

  std::cout << "scenario     " << scenario.name << " (" << to_string(scenario.controller)
            << ", " << scenario.size() << " robots, dt " << scenario.dt << ")\n";
  std::cout << "termination  " << log.termination << "\n";
  if (!log.records.empty()) {
    const auto& last = log.records.back();
    std::cout << "final time   " << last.t << "\n";
    for (std::size_t i = 0; i < last.robots.size(); ++i) {
      std::cout << "robot " << i << "      p = ";
      print_vec(std::cout, last.robots[i].p);
      std::cout << "  |p - pd| = " << (last.robots[i].p - scenario.goals.pd[i]).norm()
                << "\n";
    }
  }
  for (const auto& e : log.events) {
    std::cout << "event        t=" << e.t << " " << e.kind;
    if (!e.detail.empty()) std::cout << " " << e.detail;
    std::cout << "\n";
  }
  return code;
}

void report_configuration(const Configuration& c, const Params& params) {
  const auto thresholds = DeadlockThresholds::defaults(params);
  const auto programs = solve_all(c.world, c.goals, params);
  for (std::size_t i = 0; i < c.world.size(); ++i) {
    const auto& prog = programs[i];
    const auto rep = detect_deadlock(i, c.world, c.goals, prog, thresholds);
    std::cout << "robot " << i << "\n  p      = ";
    print_vec(std::cout, c.world.robots[i].p);
    std::cout << "\n  goal   = ";
    print_vec(std::cout, c.goals.pd[i]);
    std::cout << "\n  u_hat  = ";
    print_vec(std::cout, prog.problem.u_hat);
    std::cout << "\n  u*     = ";
    print_vec(std::cout, prog.solution.u_star);
    std::cout << "\n  active =";
    for (const auto& am : rep.active_multipliers) {
      const auto& row = prog.problem.rows[am.row];
      if (auto j = row.neighbor()) {
        std::cout << " [neighbor " << *j << ", mu " << am.mu << "]";
      } else {
        std::cout << " [box row " << am.row << ", mu " << am.mu << "]";
      }
    }
    std::cout << "\n  force-balance residual = " << rep.force_balance_residual
              << "\n  deadlock = " << (rep.verdict ? "yes" : "no") << "\n";
  }
  std::cout << "system deadlock       " << (system_deadlock(c.world, c.goals, programs, thresholds) ? "yes" : "no")
            << "\n";
  std::cout << "on safety boundary    "
            << (verify_boundary_membership(c.world, params, programs, thresholds.eps_mu, 1e-8)
                    ? "yes"
                    : "no")
            << "\n";
  for (auto [i, j] : robot_pairs(c.world.size())) {
    std::cout << "h_" << i << "_" << j << " = " << safety_index(c.world, i, j, params)
              << "  distance = " << (c.world.robots[i].p - c.world.robots[j].p).norm()
              << "\n";
  }
  if (c.world.size() == 2) {
    std::cout << "boundedness residual  " << boundedness_identity(c.world, c.goals, params)
              << "\n";
  } else if (c.world.size() == 3) {
    std::cout << "category              "
              << to_string(classify_three_robot(c.world, params, thresholds.geom_tol)) << "\n";
  }
}

int cmd_families(const std::string& family, double alpha, double theta, double radius,
                 double dg) {
  if (family == "two") {
    const Params params = scenarios::desk_params(2);
    Configuration c;
    c.goals.pd = {Vec2(-0.5 * dg, 0.0), Vec2(0.5 * dg, 0.0)};
    c.world = collinear_family(c.goals, params, alpha);
    const auto [mu0, mu1] = collinear_family_multipliers(params.kp, params.ds, dg, alpha);
    std::cout << "collinear family, alpha = " << alpha << ", D_G = " << dg << "\n";
    std::cout << "closed-form multipliers  mu_0 = " << mu0 << "  mu_1 = " << mu1 << "\n";
    report_configuration(c, params);
  } else if (family == "threeA") {
    const Params params = scenarios::desk_params(3);
    std::cout << "equilateral family, R = " << radius << "\n";
    report_configuration(three_robot_family_catA(params, radius), params);
  } else if (family == "threeB") {
    const Params params = scenarios::desk_params(3);
    std::cout << "chain family, R = " << radius << "\n";
    report_configuration(three_robot_family_catB(params, radius), params);
  } else if (family == "threeB-param") {
    const Params params = scenarios::desk_params(3);
    std::cout << "parametrized chain family, R = " << radius << ", theta = " << theta
              << ", alpha = " << alpha << "\n";
    report_configuration(catB_parametrized(params, radius, theta, alpha), params);
  } else {
    throw InvalidArgument("unknown family '" + family +
                          "' (expected two, threeA, threeB or threeB-param)");
  }
  return 0;
}

int cmd_census(unsigned n_max, int attempts, bool list) {
  EmbeddingOptions opt;
  opt.attempts = attempts;
  std::printf("%3s %10s %10s %11s %8s\n", "N", "upper", "connected", "admissible", "lower");
  for (unsigned n = 1; n <= n_max; ++n) {
    const auto row = count_admissible(n, 1.0, opt);
    std::printf("%3u %10s %10s %11zu %8s\n", n, row.upper.str().c_str(),
                row.connected.str().c_str(), row.admissible, row.lower.str().c_str());
    if (!list) continue;
    for (const auto& e : row.entries) {
      std::printf("    %-40s max-degree %zu  %s (violation %.2e, %d attempts)\n",
                  e.graph.to_string().c_str(), e.graph.max_degree(),
                  e.embedding.feasible ? "embeddable" : "not embeddable",
                  e.embedding.max_violation, e.embedding.attempts_used);
    }
  }
  return 0;
}

int cmd_verify(const std::string& path) {
  const json j = read_json_file(path);
  const Scenario scenario = scenario_from_json(j.at("scenario"));
  const TrajectoryLog log = log_from_json(j);
  const AuditReport rep = audit_log(log, scenario);
  std::cout << "records                 " << rep.records << "\n"
            << "phase-one records       " << rep.qp_steps << "\n"
            << "times increasing        " << (rep.times_increasing ? "yes" : "no") << "\n"
            << "max |h logged - h|      " << rep.max_h_mismatch << "\n"
            << "min h                   " << rep.min_h << "\n"
            << "min h (program solved)  " << rep.min_h_qp_feasible << "\n"
            << "min pair distance       " << rep.min_distance << "\n"
            << "max KKT residual        " << rep.max_kkt_residual << "\n"
            << "max |u* - re-solve|     " << rep.max_resolve_mismatch << "\n";
  const bool ok = rep.ok(1e-3, 1e-8);
  std::cout << "verdict                 " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multirobot CBF-QP deadlock analysis and resolution"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, format = "csv";
  auto* run = app.add_subcommand("run", "simulate a scenario file and export the log");
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_path, "output path");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  std::string family;
  double alpha = 0.5, theta = -0.2, radius = 2.0, dg = 2.0;
  auto* fam = app.add_subcommand("families", "print a constructed deadlock and its checks");
  fam->add_option("family", family, "two | threeA | threeB | threeB-param")->required();
  fam->add_option("--alpha", alpha, "family parameter (two: in (0,1); threeB-param: angle)");
  fam->add_option("--theta", theta, "chain angle for threeB-param, in (-pi/6, 0)");
  fam->add_option("--R", radius, "goal radius for three-robot families");
  fam->add_option("--dg", dg, "goal separation for the two-robot family");

  unsigned n_max = 4;
  int attempts = 200;
  bool list = false;
  auto* census = app.add_subcommand("census", "count admissible active-constraint graphs");
  census->add_option("--n-max", n_max, "largest vertex count (<= 4)");
  census->add_option("--attempts", attempts, "restarts per graph");
  census->add_flag("--list", list, "print the verdict for every graph");

  std::string log_path;
  auto* verify = app.add_subcommand("verify", "audit a JSON log");
  verify->add_option("log", log_path, "JSON log written by run --format json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario_path, out_path, format);
    if (*fam) {
      if (family == "threeB-param" && fam->count("--alpha") == 0) alpha = 1.0;
      return cmd_families(family, alpha, theta, radius, dg);
    }
    if (*census) return cmd_census(n_max, attempts, list);
    if (*verify) return cmd_verify(log_path);
  } catch (const Error& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
