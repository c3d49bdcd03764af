#pragma once

// Scenario files, trajectory export and the post-hoc audit of a log.
//
// Scenario files are JSON:
//
//   {
//     "name": "head-on",
//     "controller": "three-phase",          // or "cbf-qp-only", "pd-only"
//     "integrator": "rk4",                  // or "semi-implicit-euler"
//     "dt": 0.001, "t_max": 80, "seed": 0,
//     "params": {"kp": 1, "kv": 3, "ds": 0.5, "alpha": 5},   // alpha: number or list
//     "robots": [{"p": [-2, 0], "v": [0, 0], "goal": [2, 0]}, ...],
//     "thresholds": {"eps_u": ..., "eps_v": ..., "eps_goal": ..., "eps_mu": ...,
//                    "geom_tol": ..., "persist_steps": 10},  // optional
//     "resolution": {"k1": 30, "eps_theta": 1e-3, "eps_omega": 1e-3}, // optional
//     "goal_tol": 0.05, "safety_tol": 5e-4                           // optional
//   }
//
// Omitted optional fields take the defaults derived from "params".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrdl/cbf.hpp"
#include "mrdl/core.hpp"
#include "mrdl/errors.hpp"
#include "mrdl/qp.hpp"
#include "mrdl/sim.hpp"

namespace mrdl {

using json = nlohmann::json;

namespace detail {

inline Vec2 vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw InvalidArgument(what + " must be a two-element numeric array");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json vec_to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

template <class T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

inline ControllerKind controller_from_string(const std::string& s) {
  if (s == "three-phase") return ControllerKind::three_phase;
  if (s == "cbf-qp-only") return ControllerKind::cbf_qp_only;
  if (s == "pd-only") return ControllerKind::pd_only;
  throw InvalidArgument("unknown controller '" + s + "'");
}

inline Integrator integrator_from_string(const std::string& s) {
  if (s == "rk4") return Integrator::rk4;
  if (s == "semi-implicit-euler") return Integrator::semi_implicit_euler;
  throw InvalidArgument("unknown integrator '" + s + "'");
}

}  // namespace detail

inline Scenario scenario_from_json(const json& j) {
  try {
    Scenario s;
    detail::read_opt(j, "name", s.name);
    const auto& p = j.at("params");
    s.params.kp = p.at("kp").get<double>();
    s.params.kv = p.at("kv").get<double>();
    s.params.ds = p.at("ds").get<double>();
    const auto& robots = j.at("robots");
    if (!robots.is_array() || robots.empty()) {
      throw InvalidArgument("\"robots\" must be a non-empty array");
    }
    for (const auto& r : robots) {
      RobotState z;
      z.p = detail::vec_from_json(r.at("p"), "robot position");
      if (r.contains("v")) z.v = detail::vec_from_json(r.at("v"), "robot velocity");
      s.initial.push_back(z);
      s.goals.pd.push_back(detail::vec_from_json(r.at("goal"), "robot goal"));
    }
    const auto& alpha = p.at("alpha");
    if (alpha.is_number()) {
      s.params.alpha.assign(s.initial.size(), alpha.get<double>());
    } else {
      s.params.alpha = alpha.get<std::vector<double>>();
    }
    s.apply_defaults();
    if (j.contains("controller")) {
      s.controller = detail::controller_from_string(j.at("controller").get<std::string>());
    }
    if (j.contains("integrator")) {
      s.integrator = detail::integrator_from_string(j.at("integrator").get<std::string>());
    }
    detail::read_opt(j, "dt", s.dt);
    detail::read_opt(j, "t_max", s.t_max);
    detail::read_opt(j, "seed", s.seed);
    detail::read_opt(j, "goal_tol", s.goal_tol);
    detail::read_opt(j, "safety_tol", s.safety_tol);
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      detail::read_opt(t, "eps_u", s.thresholds.eps_u);
      detail::read_opt(t, "eps_v", s.thresholds.eps_v);
      detail::read_opt(t, "eps_goal", s.thresholds.eps_goal);
      detail::read_opt(t, "eps_mu", s.thresholds.eps_mu);
      detail::read_opt(t, "geom_tol", s.thresholds.geom_tol);
      detail::read_opt(t, "persist_steps", s.thresholds.persist_steps);
    }
    if (j.contains("resolution")) {
      const auto& r = j.at("resolution");
      detail::read_opt(r, "k1", s.resolution.k1);
      detail::read_opt(r, "eps_theta", s.resolution.eps_theta);
      detail::read_opt(r, "eps_omega", s.resolution.eps_omega);
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed scenario: ") + e.what());
  }
}

inline json scenario_to_json(const Scenario& s) {
  json robots = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    robots.push_back({{"p", detail::vec_to_json(s.initial[i].p)},
                      {"v", detail::vec_to_json(s.initial[i].v)},
                      {"goal", detail::vec_to_json(s.goals.pd[i])}});
  }
  return {
      {"name", s.name},
      {"controller", to_string(s.controller)},
      {"integrator", to_string(s.integrator)},
      {"dt", s.dt},
      {"t_max", s.t_max},
      {"seed", s.seed},
      {"goal_tol", s.goal_tol},
      {"safety_tol", s.safety_tol},
      {"params", {{"kp", s.params.kp}, {"kv", s.params.kv}, {"ds", s.params.ds},
                  {"alpha", s.params.alpha}}},
      {"robots", robots},
      {"thresholds", {{"eps_u", s.thresholds.eps_u},
                      {"eps_v", s.thresholds.eps_v},
                      {"eps_goal", s.thresholds.eps_goal},
                      {"eps_mu", s.thresholds.eps_mu},
                      {"geom_tol", s.thresholds.geom_tol},
                      {"persist_steps", s.thresholds.persist_steps}}},
      {"resolution", {{"k1", s.resolution.k1},
                      {"eps_theta", s.resolution.eps_theta},
                      {"eps_omega", s.resolution.eps_omega}}},
  };
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Trajectory logs

inline json log_to_json(const TrajectoryLog& log, const Scenario& scenario) {
  json records = json::array();
  for (const auto& r : log.records) {
    json robots = json::array();
    for (std::size_t i = 0; i < r.robots.size(); ++i) {
      json entry = {{"p", detail::vec_to_json(r.robots[i].p)},
                    {"v", detail::vec_to_json(r.robots[i].v)},
                    {"u_star", detail::vec_to_json(r.u_star[i])},
                    {"u_hat", detail::vec_to_json(r.u_hat[i])}};
      if (r.qp_solved()) {
        entry["mu"] = r.mu[i];
        entry["active"] = r.active[i];
      }
      robots.push_back(std::move(entry));
    }
    records.push_back({{"t", r.t}, {"phase", r.phase}, {"h", r.h}, {"robots", robots}});
  }
  json events = json::array();
  for (const auto& e : log.events) {
    events.push_back({{"t", e.t}, {"kind", e.kind}, {"detail", e.detail}});
  }
  return {{"scenario", scenario_to_json(scenario)},
          {"robots", log.robots},
          {"termination", log.termination},
          {"events", events},
          {"records", records}};
}

inline TrajectoryLog log_from_json(const json& j) {
  try {
    TrajectoryLog log;
    log.robots = j.at("robots").get<std::size_t>();
    log.termination = j.at("termination").get<std::string>();
    for (const auto& e : j.at("events")) {
      log.events.push_back({e.at("t").get<double>(), e.at("kind").get<std::string>(),
                            e.at("detail").get<std::string>()});
    }
    for (const auto& rj : j.at("records")) {
      StepRecord r;
      r.t = rj.at("t").get<double>();
      r.phase = rj.at("phase").get<int>();
      r.h = rj.at("h").get<std::vector<double>>();
      for (const auto& e : rj.at("robots")) {
        r.robots.push_back({detail::vec_from_json(e.at("p"), "p"),
                            detail::vec_from_json(e.at("v"), "v")});
        r.u_star.push_back(detail::vec_from_json(e.at("u_star"), "u_star"));
        r.u_hat.push_back(detail::vec_from_json(e.at("u_hat"), "u_hat"));
        if (e.contains("mu")) {
          r.mu.push_back(e.at("mu").get<std::vector<double>>());
          r.active.push_back(e.at("active").get<std::vector<std::size_t>>());
        }
      }
      log.records.push_back(std::move(r));
    }
    return log;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed log: ") + e.what());
  }
}

/// CSV header: fixed robot columns, then h_i_j and mu_i_j for every pair.
inline std::string csv_header(std::size_t robots) {
  std::string s = "t,robot_id,px,py,vx,vy,ux_star,uy_star,ux_hat,uy_hat,phase";
  for (auto [i, j] : robot_pairs(robots)) {
    const auto tag = std::to_string(i) + "_" + std::to_string(j);
    s += ",h_" + tag + ",mu_" + tag;
  }
  return s;
}

/// One row per step per robot. mu_i_j on robot r's row is the multiplier of
/// r's constraint for the other robot of the pair; empty when r is not in the
/// pair or no program was solved at that step.
inline void write_csv(std::ostream& out, const TrajectoryLog& log) {
  out << csv_header(log.robots) << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto pairs = robot_pairs(log.robots);
  for (const auto& r : log.records) {
    for (std::size_t i = 0; i < r.robots.size(); ++i) {
      const auto& z = r.robots[i];
      out << r.t << ',' << i << ',' << z.p.x() << ',' << z.p.y() << ',' << z.v.x() << ','
          << z.v.y() << ',' << r.u_star[i].x() << ',' << r.u_star[i].y() << ','
          << r.u_hat[i].x() << ',' << r.u_hat[i].y() << ',' << r.phase;
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [a, b] = pairs[k];
        out << ',' << r.h[k] << ',';
        if (i == a || i == b) {
          if (auto mu = r.neighbor_mu(i, i == a ? b : a)) out << *mu;
        }
      }
      out << '\n';
    }
  }
}

enum class LogFormat { csv, json };

inline LogFormat log_format_from_string(const std::string& s) {
  if (s == "csv") return LogFormat::csv;
  if (s == "json") return LogFormat::json;
  throw InvalidArgument("unknown format '" + s + "' (expected csv or json)");
}

inline void export_log(const TrajectoryLog& log, const Scenario& scenario,
                       LogFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  if (format == LogFormat::csv) {
    write_csv(out, log);
  } else {
    out << log_to_json(log, scenario).dump() << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Audit

struct AuditReport {
  std::size_t records = 0;
  std::size_t qp_steps = 0;
  double max_h_mismatch = 0.0;     ///< |logged h - recomputed h|
  double min_h = std::numeric_limits<double>::infinity();
  double min_h_qp_feasible = std::numeric_limits<double>::infinity();
  double min_distance = std::numeric_limits<double>::infinity();
  double max_kkt_residual = 0.0;   ///< logged (u*, mu) against the rebuilt program
  double max_resolve_mismatch = 0.0;  ///< logged u* against a fresh solve
  bool times_increasing = true;

  bool ok(double h_tol, double kkt_tol) const {
    return times_increasing && max_h_mismatch <= 1e-12 &&
           (qp_steps == 0 || min_h_qp_feasible >= -h_tol) && max_kkt_residual <= kkt_tol;
  }
};

/// Recomputes h for every pair and step from the logged states, and checks
/// the logged primal-dual pair of every phase-one step against a program
/// rebuilt from the logged state.
inline AuditReport audit_log(const TrajectoryLog& log, const Scenario& scenario) {
  AuditReport rep;
  const auto& params = scenario.params;
  const auto pairs = robot_pairs(log.robots);
  double last_t = -std::numeric_limits<double>::infinity();
  for (const auto& r : log.records) {
    ++rep.records;
    if (!(r.t > last_t)) rep.times_increasing = false;
    last_t = r.t;
    const WorldState world{r.robots, r.t};
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [i, j] = pairs[k];
      const double h = signed_safety_index(world, i, j, params);
      rep.max_h_mismatch = std::max(rep.max_h_mismatch, std::abs(h - r.h.at(k)));
      rep.min_h = std::min(rep.min_h, h);
      rep.min_distance = std::min(rep.min_distance, (r.robots[i].p - r.robots[j].p).norm());
      if (r.qp_solved()) rep.min_h_qp_feasible = std::min(rep.min_h_qp_feasible, h);
    }
    if (!r.qp_solved()) continue;
    ++rep.qp_steps;
    for (std::size_t i = 0; i < log.robots; ++i) {
      const QPProblem problem = assemble_qp(i, world, scenario.goals, params);
      QPSolution claimed;
      claimed.u_star = r.u_star[i];
      claimed.mu = r.mu[i];
      rep.max_kkt_residual = std::max(rep.max_kkt_residual, verify_kkt(problem, claimed).max());
      const QPSolution fresh = solve_qp(problem);
      rep.max_resolve_mismatch =
          std::max(rep.max_resolve_mismatch, (fresh.u_star - r.u_star[i]).norm());
    }
  }
  return rep;
}

}  // namespace mrdl
