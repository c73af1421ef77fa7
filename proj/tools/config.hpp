#pragma once

#include <nlohmann/json.hpp>

#include "mbcd/problems/registry.hpp"
#include "mbcd/solver.hpp"

namespace mbcd {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration: a single JSON document.
//
// {
//   "problem":  { "name": "gpca-ls", "params": { "D": 4, "c": [2, 2] } },
//   "schedule": {
//     "rules": [ { "rule": "exact_min" },
//                { "rule": "rgd", "step": { "kind": "inverse_smoothness" } } ],
//     "rgd_blocks": [0],          // alternative to "rules": blended schedule,
//     "step": { ... },            //   gradient blocks 0-based, last block excluded
//     "blended_init": false,
//     "stop": { "max_sweeps": 500, "grad_norm_tol": 1e-6, ... }
//   },
//   "seeds":  { "instance": 1, "init": 1, "restarts": 1 },
//   "output": { "record_wall_time": false, "estimate_samples": 200 }
// }
//
// Every section is optional except "problem".  Omitting "rules" and
// "rgd_blocks" selects per-block defaults (exact minimization where
// available, else the surrogate, else backtracking gradient steps).  An
// inverse-smoothness step without an explicit "smoothness" has the constant
// estimated before the run.  Unknown keys are rejected everywhere.
// ---------------------------------------------------------------------------

struct StepConfig {
  StepKind kind = StepKind::Backtracking;
  std::optional<double> smoothness;  // absent = estimate before running
  double constant = 0.0;
  double safety = 1.0;
  double start = 1.0;
  double shrink = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 30;
};

struct RuleConfig {
  Rule rule = Rule::ExactMin;
  StepConfig step;
};

struct ScheduleConfig {
  std::optional<std::vector<RuleConfig>> rules;
  std::optional<std::vector<int>> rgd_blocks;  // blended form
  StepConfig rgd_step;                         // step policy for the blended form
  bool blended_init = false;
  StopRules stop;
};

struct RunConfig {
  std::string problem;
  Params params;
  ScheduleConfig schedule;
  std::uint64_t instance_seed = 1;
  std::uint64_t init_seed = 1;
  int restarts = 1;
  bool record_wall_time = false;
  int estimate_samples = 200;
};

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  require(obj.is_object(), where + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    require(known, where + ": unknown key \"" + item.key() + "\"");
  }
}

inline Params parse_params(const json& obj, const std::string& where) {
  require(obj.is_object(), where + " must be an object");
  Params out;
  for (const auto& item : obj.items()) {
    const json& v = item.value();
    if (v.is_number()) {
      out[item.key()] = v.get<double>();
    } else if (v.is_string()) {
      out[item.key()] = v.get<std::string>();
    } else if (v.is_array()) {
      std::vector<double> xs;
      for (const json& e : v) {
        require(e.is_number(), where + "." + item.key() + ": arrays must hold numbers");
        xs.push_back(e.get<double>());
      }
      out[item.key()] = std::move(xs);
    } else {
      throw std::invalid_argument(where + "." + item.key() +
                                  ": values must be numbers, strings, or number arrays");
    }
  }
  return out;
}

inline double get_number(const json& obj, const char* key, double fallback,
                         const std::string& where) {
  if (!obj.contains(key)) return fallback;
  require(obj[key].is_number(), where + "." + key + " must be a number");
  return obj[key].get<double>();
}

inline int get_int(const json& obj, const char* key, int fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  require(obj[key].is_number_integer(), where + "." + key + " must be an integer");
  return obj[key].get<int>();
}

inline bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  require(obj[key].is_boolean(), where + "." + key + " must be a boolean");
  return obj[key].get<bool>();
}

inline StepConfig parse_step(const json& obj, const std::string& where) {
  reject_unknown_keys(
      obj, {"kind", "smoothness", "constant", "safety", "start", "shrink", "armijo",
            "max_backtracks"},
      where);
  StepConfig s;
  std::string kind = "backtracking";
  if (obj.contains("kind")) {
    require(obj["kind"].is_string(), where + ".kind must be a string");
    kind = obj["kind"].get<std::string>();
  }
  if (kind == "constant") s.kind = StepKind::Constant;
  else if (kind == "inverse_smoothness") s.kind = StepKind::InverseSmoothness;
  else if (kind == "backtracking") s.kind = StepKind::Backtracking;
  else throw std::invalid_argument(where + ".kind: unknown step kind \"" + kind + "\"");
  if (obj.contains("smoothness")) s.smoothness = get_number(obj, "smoothness", 0.0, where);
  s.constant = get_number(obj, "constant", s.constant, where);
  s.safety = get_number(obj, "safety", s.safety, where);
  s.start = get_number(obj, "start", s.start, where);
  s.shrink = get_number(obj, "shrink", s.shrink, where);
  s.armijo = get_number(obj, "armijo", s.armijo, where);
  s.max_backtracks = get_int(obj, "max_backtracks", s.max_backtracks, where);
  return s;
}

inline StopRules parse_stop(const json& obj, const std::string& where) {
  reject_unknown_keys(obj,
                      {"max_sweeps", "grad_norm_tol", "objective_decrease_tol", "target_value",
                       "target_slack", "wall_clock_s"},
                      where);
  StopRules s;
  s.max_sweeps = get_int(obj, "max_sweeps", s.max_sweeps, where);
  if (obj.contains("grad_norm_tol")) s.grad_norm_tol = get_number(obj, "grad_norm_tol", 0, where);
  if (obj.contains("objective_decrease_tol"))
    s.objective_decrease_tol = get_number(obj, "objective_decrease_tol", 0, where);
  if (obj.contains("target_value")) s.target_value = get_number(obj, "target_value", 0, where);
  s.target_slack = get_number(obj, "target_slack", s.target_slack, where);
  if (obj.contains("wall_clock_s")) s.wall_clock_s = get_number(obj, "wall_clock_s", 0, where);
  return s;
}

inline ScheduleConfig parse_schedule(const json& obj, const std::string& where) {
  reject_unknown_keys(obj, {"rules", "rgd_blocks", "step", "blended_init", "stop"}, where);
  ScheduleConfig s;
  if (obj.contains("rules")) {
    require(obj["rules"].is_array(), where + ".rules must be an array");
    std::vector<RuleConfig> rules;
    int at = 0;
    for (const json& r : obj["rules"]) {
      const std::string rw = where + ".rules[" + std::to_string(at++) + "]";
      reject_unknown_keys(r, {"rule", "step"}, rw);
      require(r.contains("rule") && r["rule"].is_string(), rw + ".rule must be a string");
      RuleConfig rc;
      rc.rule = rule_from_name(r["rule"].get<std::string>());
      if (r.contains("step")) rc.step = parse_step(r["step"], rw + ".step");
      rules.push_back(rc);
    }
    s.rules = std::move(rules);
  }
  if (obj.contains("rgd_blocks")) {
    require(!s.rules, where + ": give either rules or rgd_blocks, not both");
    require(obj["rgd_blocks"].is_array(), where + ".rgd_blocks must be an array");
    std::vector<int> blocks;
    for (const json& e : obj["rgd_blocks"]) {
      require(e.is_number_integer(), where + ".rgd_blocks must hold integers");
      blocks.push_back(e.get<int>());
    }
    s.rgd_blocks = std::move(blocks);
  }
  if (obj.contains("step")) {
    require(static_cast<bool>(s.rgd_blocks), where + ".step only applies to the rgd_blocks form");
    s.rgd_step = parse_step(obj["step"], where + ".step");
  }
  s.blended_init = get_bool(obj, "blended_init", false, where);
  require(!(s.blended_init && s.rgd_blocks), where + ": rgd_blocks is already blended");
  if (obj.contains("stop")) s.stop = parse_stop(obj["stop"], where + ".stop");
  return s;
}

inline RunConfig parse_config(const json& root) {
  reject_unknown_keys(root, {"problem", "schedule", "seeds", "output"}, "config");
  require(root.contains("problem"), "config: missing \"problem\"");
  RunConfig c;

  const json& prob = root["problem"];
  reject_unknown_keys(prob, {"name", "params"}, "config.problem");
  require(prob.contains("name") && prob["name"].is_string(),
          "config.problem.name must be a string");
  c.problem = prob["name"].get<std::string>();
  if (prob.contains("params")) c.params = parse_params(prob["params"], "config.problem.params");

  if (root.contains("schedule")) c.schedule = parse_schedule(root["schedule"], "config.schedule");

  if (root.contains("seeds")) {
    const json& seeds = root["seeds"];
    reject_unknown_keys(seeds, {"instance", "init", "restarts"}, "config.seeds");
    c.instance_seed =
        static_cast<std::uint64_t>(get_int(seeds, "instance", 1, "config.seeds"));
    c.init_seed = static_cast<std::uint64_t>(get_int(seeds, "init", 1, "config.seeds"));
    c.restarts = get_int(seeds, "restarts", 1, "config.seeds");
    require(c.restarts >= 1, "config.seeds.restarts must be at least 1");
  }

  if (root.contains("output")) {
    const json& out = root["output"];
    reject_unknown_keys(out, {"record_wall_time", "estimate_samples"}, "config.output");
    c.record_wall_time = get_bool(out, "record_wall_time", false, "config.output");
    c.estimate_samples = get_int(out, "estimate_samples", 200, "config.output");
    require(c.estimate_samples >= 1, "config.output.estimate_samples must be positive");
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(root);
}

// ---------------------------------------------------------------------------
// Resolving a parsed config against a concrete problem instance
// ---------------------------------------------------------------------------

inline StepPolicy make_step_policy(const StepConfig& sc, double estimated_smoothness) {
  StepPolicy p;
  p.kind = sc.kind;
  p.constant = sc.constant;
  p.smoothness = sc.smoothness ? *sc.smoothness : estimated_smoothness;
  p.safety = sc.safety;
  p.start = sc.start;
  p.shrink = sc.shrink;
  p.armijo = sc.armijo;
  p.max_backtracks = sc.max_backtracks;
  return p;
}

// Which blocks need a descent-constant estimate before the schedule can be
// materialized (inverse-smoothness steps without an explicit constant).
inline std::vector<int> blocks_needing_estimates(const ScheduleConfig& s, int b) {
  std::vector<int> out;
  const auto needs = [](const RuleConfig& rc) {
    return rc.rule == Rule::RiemannianGd && rc.step.kind == StepKind::InverseSmoothness &&
           !rc.step.smoothness;
  };
  if (s.rules) {
    for (int i = 0; i < static_cast<int>(s.rules->size()) && i < b; ++i)
      if (needs((*s.rules)[static_cast<std::size_t>(i)])) out.push_back(i);
  } else if (s.rgd_blocks && s.rgd_step.kind == StepKind::InverseSmoothness &&
             !s.rgd_step.smoothness) {
    for (int i : *s.rgd_blocks)
      if (i >= 0 && i < b) out.push_back(i);
  }
  return out;
}

// Builds the solver schedule; `estimated` maps block index to an estimated
// descent constant for blocks listed by blocks_needing_estimates.
inline SolverSchedule resolve_schedule(const ScheduleConfig& s, const Problem& p,
                                       const std::map<int, double>& estimated) {
  const int b = p.num_blocks();
  const auto estimate_for = [&estimated](int i) {
    const auto it = estimated.find(i);
    return it == estimated.end() ? 0.0 : it->second;
  };
  SolverSchedule sched;
  if (s.rules) {
    require(static_cast<int>(s.rules->size()) == b,
            "config.schedule.rules: need one rule per block (" + std::to_string(b) + ")");
    for (int i = 0; i < b; ++i) {
      const RuleConfig& rc = (*s.rules)[static_cast<std::size_t>(i)];
      sched.rules.push_back({rc.rule, make_step_policy(rc.step, estimate_for(i))});
    }
    sched.blended_init = s.blended_init;
  } else if (s.rgd_blocks) {
    sched = blended_schedule(b, *s.rgd_blocks, StepPolicy{});
    for (int i : *s.rgd_blocks)
      sched.rules[static_cast<std::size_t>(i)] =
          BlockRule::rgd(make_step_policy(s.rgd_step, estimate_for(i)));
  } else {
    // Default: the strongest rule each block supports.
    for (int i = 0; i < b; ++i) {
      if (p.has_exact_min(i)) sched.rules.push_back(BlockRule::exact_min());
      else if (p.has_majorizer(i)) sched.rules.push_back(BlockRule::majorize());
      else sched.rules.push_back(BlockRule::rgd(StepPolicy::backtracking()));
    }
    sched.blended_init = s.blended_init;
  }
  sched.stop = s.stop;
  return sched;
}

// Canonical echo of a parsed config, used as the run's config record.
inline json config_echo(const RunConfig& c) {
  json prob;
  prob["name"] = c.problem;
  json params = json::object();
  for (const auto& [k, v] : c.params) {
    if (std::holds_alternative<double>(v)) params[k] = std::get<double>(v);
    else if (std::holds_alternative<std::string>(v)) params[k] = std::get<std::string>(v);
    else params[k] = std::get<std::vector<double>>(v);
  }
  prob["params"] = params;

  const auto step_json = [](const StepConfig& sc) {
    json s;
    s["kind"] = sc.kind == StepKind::Constant ? "constant"
                : sc.kind == StepKind::InverseSmoothness ? "inverse_smoothness"
                                                         : "backtracking";
    if (sc.smoothness) s["smoothness"] = *sc.smoothness;
    if (sc.kind == StepKind::Constant) s["constant"] = sc.constant;
    if (sc.kind == StepKind::InverseSmoothness) s["safety"] = sc.safety;
    if (sc.kind == StepKind::Backtracking) {
      s["start"] = sc.start;
      s["shrink"] = sc.shrink;
      s["armijo"] = sc.armijo;
      s["max_backtracks"] = sc.max_backtracks;
    }
    return s;
  };

  json sched;
  if (c.schedule.rules) {
    json rules = json::array();
    for (const RuleConfig& rc : *c.schedule.rules) {
      json r;
      r["rule"] = rule_name(rc.rule);
      if (rc.rule == Rule::RiemannianGd) r["step"] = step_json(rc.step);
      rules.push_back(r);
    }
    sched["rules"] = rules;
    sched["blended_init"] = c.schedule.blended_init;
  } else if (c.schedule.rgd_blocks) {
    sched["rgd_blocks"] = *c.schedule.rgd_blocks;
    sched["step"] = step_json(c.schedule.rgd_step);
  } else {
    sched["blended_init"] = c.schedule.blended_init;
  }
  json stop;
  stop["max_sweeps"] = c.schedule.stop.max_sweeps;
  if (c.schedule.stop.grad_norm_tol) stop["grad_norm_tol"] = *c.schedule.stop.grad_norm_tol;
  if (c.schedule.stop.objective_decrease_tol)
    stop["objective_decrease_tol"] = *c.schedule.stop.objective_decrease_tol;
  if (c.schedule.stop.target_value) {
    stop["target_value"] = *c.schedule.stop.target_value;
    stop["target_slack"] = c.schedule.stop.target_slack;
  }
  if (c.schedule.stop.wall_clock_s) stop["wall_clock_s"] = *c.schedule.stop.wall_clock_s;
  sched["stop"] = stop;

  json root;
  root["problem"] = prob;
  root["schedule"] = sched;
  root["seeds"] = {{"instance", c.instance_seed}, {"init", c.init_seed}, {"restarts", c.restarts}};
  root["output"] = {{"record_wall_time", c.record_wall_time},
                    {"estimate_samples", c.estimate_samples}};
  return root;
}

}  // namespace mbcd
