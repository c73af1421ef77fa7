#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "config.hpp"
#include "mbcd/diagnostics.hpp"
#include "mbcd/trace_io.hpp"

namespace mbcd::cli {

namespace fs = std::filesystem;

// Exit codes: 0 success, 1 configuration / usage / failed check,
// 2 run aborted by a descent or surrogate violation.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitAbort = 2;

inline int worker_threads() {
  if (const char* env = std::getenv("MBCD_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<int>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

// Machine-readable failure record dropped into the run directory.
inline void write_error_record(const fs::path& out_dir, const std::string& kind, int exit_code,
                               const std::string& message) {
  std::ostringstream os;
  os << "# mbcd-error 1\n";
  os << "kind " << kind << "\n";
  os << "exit " << exit_code << "\n";
  os << "message " << one_line(message) << "\n";
  try {
    atomic_write_file(out_dir / "error.txt", os.str());
  } catch (...) {
    // The record is best-effort; the console still carries the message.
  }
}

inline std::string slurp_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string format_point(const ProductPoint& x) {
  std::ostringstream os;
  os << "# mbcd-point 1\n";
  os << "# blocks " << x.num_blocks() << "\n";
  for (int i = 0; i < x.num_blocks(); ++i) {
    os << i + 1 << ' ' << x.block(i).size();
    for (Eigen::Index j = 0; j < x.block(i).size(); ++j) os << ' ' << fmt17(x.block(i)[j]);
    os << '\n';
  }
  return os.str();
}

inline std::string format_restart_rows(const std::vector<RestartRun>& runs) {
  std::ostringstream os;
  os << "index,seed,final_value,sweeps,stop_reason,final_grad\n";
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const RestartRun& r = runs[k];
    os << k << ',' << r.seed << ',' << fmt17(r.final_value) << ',' << r.sweeps << ','
       << stop_reason_name(r.reason) << ',' << fmt17(r.final_grad) << '\n';
  }
  return os.str();
}

inline std::uint64_t derived_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt));
}

// ---------------------------------------------------------------------------
// run: solve a configured problem, writing trace / summary / point records
// ---------------------------------------------------------------------------

inline int cmd_run(const std::string& config_path, const std::string& out_path, std::ostream& out,
                   std::ostream& err) {
  const fs::path out_dir(out_path);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    err << "error: cannot create output directory " << out_dir << ": " << ec.message() << "\n";
    return kExitConfig;
  }

  RunConfig cfg;
  BuiltProblem built;
  SolverSchedule sched;
  try {
    cfg = parse_config_text(slurp_file(config_path));
    built = build_problem(cfg.problem, cfg.params, cfg.instance_seed);
    const Problem& p = *built.problem;

    std::map<int, double> estimated;
    for (int i : blocks_needing_estimates(cfg.schedule, p.num_blocks())) {
      const double l = estimate_tilde_L(p, i, cfg.estimate_samples,
                                        derived_seed(cfg.instance_seed, 1000 + i));
      estimated[i] = l;
      out << "estimated block " << i + 1 << " descent constant: " << fmt17(l) << "\n";
    }
    sched = resolve_schedule(cfg.schedule, p, estimated);
    validate_schedule(p, sched);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    write_error_record(out_dir, "config", kExitConfig, e.what());
    return kExitConfig;
  }

  const Problem& p = *built.problem;
  SolveOptions opt;
  opt.record_wall_time = cfg.record_wall_time;

  RestartResult res;
  try {
    res = restart_driver(p, sched, cfg.restarts, cfg.init_seed, opt, worker_threads());
  } catch (const monotonicity_error& e) {
    err << "run aborted: " << e.what() << "\n";
    write_error_record(out_dir, "monotonicity", kExitAbort, e.what());
    return kExitAbort;
  } catch (const majorizer_error& e) {
    err << "run aborted: " << e.what() << "\n";
    write_error_record(out_dir, "majorizer", kExitAbort, e.what());
    return kExitAbort;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    write_error_record(out_dir, "internal", kExitConfig, e.what());
    return kExitConfig;
  }

  res.best.meta.instance_seed = cfg.instance_seed;
  res.best.meta.problem_params = config_echo(cfg)["problem"]["params"].dump();

  SummaryRow row = summarize_run(res.best);
  row.add("restarts", cfg.restarts);
  row.add("best_index", res.best_index);
  if (built.target_value) {
    row.add("target_value", *built.target_value);
    row.add("target_gap", res.best.final_value - *built.target_value);
  }

  try {
    atomic_write_file(out_dir / "config.json", config_echo(cfg).dump(2) + "\n");
    write_trace(res.best, out_dir / "trace.txt");
    atomic_write_file(out_dir / "summary.csv", format_summary(row));
    atomic_write_file(out_dir / "runs.csv", format_restart_rows(res.runs));
    atomic_write_file(out_dir / "final_point.txt", format_point(res.best.final_point));
  } catch (const std::exception& e) {
    err << "error: cannot write outputs: " << e.what() << "\n";
    write_error_record(out_dir, "io", kExitConfig, e.what());
    return kExitConfig;
  }

  out << "problem " << p.name() << ", " << cfg.restarts << " restart(s), best run "
      << res.best_index << "\n";
  out << "final value " << fmt17(res.best.final_value) << " after " << res.best.sweeps_executed
      << " sweep(s), stop: " << stop_reason_name(res.best.stop_reason) << "\n";
  if (!res.best.degenerate_events.empty())
    out << "note: " << res.best.degenerate_events.size()
        << " degenerate block solve(s) kept the previous iterate\n";
  if (!res.best.stalled_blocks.empty())
    out << "warning: " << res.best.stalled_blocks.size()
        << " stalled line search(es) took a zero step\n";
  out << "outputs in " << out_dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// audit: gradient check, surrogate audit, and feasibility checks
// ---------------------------------------------------------------------------

inline int cmd_audit(const std::string& config_path, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  BuiltProblem built;
  try {
    cfg = parse_config_text(slurp_file(config_path));
    built = build_problem(cfg.problem, cfg.params, cfg.instance_seed);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const Problem& p = *built.problem;
  bool all_pass = true;

  const GradcheckReport gc = gradcheck(p, 100, derived_seed(cfg.instance_seed, 11));
  if (gc.checked_blocks == 0) {
    out << "[SKIP] gradcheck: no blocks expose ambient gradients\n";
  } else {
    all_pass = all_pass && gc.pass;
    out << (gc.pass ? "[PASS]" : "[FAIL]") << " gradcheck: max relative error "
        << fmt17(gc.max_rel_error) << " over " << gc.samples << " points, " << gc.checked_blocks
        << " block(s)";
    if (!gc.pass) out << " (worst: block " << gc.worst_block + 1 << ")";
    out << "\n";
  }

  bool any_majorizer = false;
  for (int i = 0; i < p.num_blocks(); ++i) {
    if (!p.has_majorizer(i)) continue;
    any_majorizer = true;
    const MajorizerAudit ma = majorizer_audit(p, i, 1000, derived_seed(cfg.instance_seed, 23 + i));
    all_pass = all_pass && ma.pass;
    out << (ma.pass ? "[PASS]" : "[FAIL]") << " majorizer audit, block " << i + 1
        << ": worst slack " << fmt17(ma.worst_slack) << ", anchor gap " << fmt17(ma.worst_anchor_gap)
        << ", tangency " << fmt17(ma.worst_tangency) << " over " << ma.samples << " samples\n";
  }
  if (!any_majorizer) out << "[SKIP] majorizer audit: no surrogate-capable blocks\n";

  Rng rng(derived_seed(cfg.instance_seed, 47));
  double worst_violation = 0.0;
  bool feasible = true;
  for (int k = 0; k < 20; ++k) {
    const ProductPoint z = random_product_point(p.blocks(), rng);
    const Feasibility fz = is_feasible(p.blocks(), z);
    feasible = feasible && fz.feasible;
    worst_violation = std::max(worst_violation, fz.violation);
    for (int i = 0; i < p.num_blocks(); ++i) {
      VectorXd candidate;
      if (p.has_exact_min(i)) candidate = p.exact_min(i, z).point;
      else if (p.has_majorizer(i)) candidate = p.majorizer(i).minimize(z);
      else continue;
      const Feasibility fc = is_feasible(p.block_spec(i), candidate);
      feasible = feasible && fc.feasible;
      worst_violation = std::max(worst_violation, fc.violation);
    }
  }
  all_pass = all_pass && feasible;
  out << (feasible ? "[PASS]" : "[FAIL]")
      << " feasibility: worst constraint violation " << fmt17(worst_violation)
      << " over sampled points and block updates\n";

  out << (all_pass ? "audit passed" : "audit failed") << "\n";
  return all_pass ? kExitOk : kExitConfig;
}

// ---------------------------------------------------------------------------
// certify: check a recorded trace against its stationarity rate bound
// ---------------------------------------------------------------------------

inline int cmd_certify(const std::string& trace_path, const std::string& report_path,
                       const std::string& mode_name, int samples, std::ostream& out,
                       std::ostream& err) {
  try {
    const RunTrace tr = read_trace(trace_path);
    const RateMode mode = rate_mode_from_name(mode_name);
    require(!tr.meta.problem_params.empty(),
            "trace does not carry instance parameters; cannot rebuild the problem");
    const Params params = parse_params(json::parse(tr.meta.problem_params), "trace params");
    const BuiltProblem built = build_problem(tr.meta.problem, params, tr.meta.instance_seed);

    const CertifyOutcome oc = certify_with_escalation(
        *built.problem, tr, mode, samples, derived_seed(tr.meta.instance_seed, 91));
    write_certificate(oc.certificate, report_path);

    out << "certificate " << (oc.certificate.pass ? "PASS" : "FAIL") << ": mode "
        << rate_mode_name(mode) << ", C = " << fmt17(oc.c_constant) << ", worst margin "
        << fmt17(oc.certificate.worst_margin) << ", " << oc.samples_used
        << " estimation samples\n";
    out << "report written to " << report_path << "\n";
    return oc.certificate.pass ? kExitOk : kExitConfig;
  } catch (const std::exception& e) {
    err << "certify error: " << e.what() << "\n";
    return kExitConfig;
  }
}

// ---------------------------------------------------------------------------
// list: available problems and their per-block capabilities
// ---------------------------------------------------------------------------

inline int cmd_list(std::ostream& out) {
  for (const std::string& name : problem_names()) {
    const BuiltProblem built = build_problem(name, {}, 1);
    const Problem& p = *built.problem;
    out << name << ": " << p.num_blocks() << " block(s)\n";
    for (int i = 0; i < p.num_blocks(); ++i) {
      out << "  block " << i + 1 << ": " << p.block_spec(i).describe() << "  rules:";
      if (p.has_exact_min(i)) out << " exact_min";
      if (p.has_majorizer(i)) out << " majorize";
      if (p.block_spec(i).smooth()) out << " rgd";
      out << "\n";
    }
  }
  return kExitOk;
}

}  // namespace mbcd::cli
