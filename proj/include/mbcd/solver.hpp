#pragma once

#include <chrono>
#include <exception>
#include <functional>
#include <optional>
#include <thread>
#include <utility>

#include "mbcd/objectives.hpp"

namespace mbcd {

// ---------------------------------------------------------------------------
// Schedules: one update rule per block, applied cyclically.  A blended
// schedule additionally exact-minimizes the last block once before sweep 0,
// so every sweep starts from a point whose last block is coordinate-wise
// optimal.
// ---------------------------------------------------------------------------

enum class Rule { ExactMin, MajorizeMin, RiemannianGd };

inline std::string rule_name(Rule r) {
  switch (r) {
    case Rule::ExactMin: return "exact_min";
    case Rule::MajorizeMin: return "majorize";
    case Rule::RiemannianGd: return "rgd";
  }
  throw std::logic_error("rule_name: bad rule");
}

inline Rule rule_from_name(const std::string& s) {
  if (s == "exact_min") return Rule::ExactMin;
  if (s == "majorize") return Rule::MajorizeMin;
  if (s == "rgd") return Rule::RiemannianGd;
  throw std::invalid_argument("unknown rule name: " + s);
}

enum class StepKind { Constant, InverseSmoothness, Backtracking };

struct StepPolicy {
  StepKind kind = StepKind::Backtracking;
  double constant = 0.0;    // Constant: fixed step length
  double smoothness = 0.0;  // InverseSmoothness: block bound L, step = safety / L
  double safety = 1.0;
  double start = 1.0;  // Backtracking line search
  double shrink = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 30;

  static StepPolicy constant_step(double s) {
    StepPolicy p;
    p.kind = StepKind::Constant;
    p.constant = s;
    return p;
  }
  static StepPolicy inverse_smoothness(double l, double safety = 1.0) {
    StepPolicy p;
    p.kind = StepKind::InverseSmoothness;
    p.smoothness = l;
    p.safety = safety;
    return p;
  }
  static StepPolicy backtracking(double start = 1.0) {
    StepPolicy p;
    p.kind = StepKind::Backtracking;
    p.start = start;
    return p;
  }
};

struct BlockRule {
  Rule rule = Rule::ExactMin;
  StepPolicy step;

  static BlockRule exact_min() { return {Rule::ExactMin, {}}; }
  static BlockRule majorize() { return {Rule::MajorizeMin, {}}; }
  static BlockRule rgd(StepPolicy p) { return {Rule::RiemannianGd, std::move(p)}; }
};

struct StopRules {
  int max_sweeps = 1000;
  std::optional<double> grad_norm_tol;          // on the recorded gradient scope
  std::optional<double> objective_decrease_tol; // per full sweep
  std::optional<double> target_value;           // stop once F <= target + slack
  double target_slack = 0.0;
  std::optional<double> wall_clock_s;           // real time; nondeterministic
};

struct SolverSchedule {
  std::vector<BlockRule> rules;
  bool blended_init = false;
  StopRules stop;
};

// Blended schedule over b blocks: the listed blocks (0-based, last excluded)
// take Riemannian gradient steps with `policy`; all others exact-minimize.
inline SolverSchedule blended_schedule(int b, const std::vector<int>& rgd_blocks,
                                       const StepPolicy& policy) {
  require(b >= 2, "blended_schedule: need at least two blocks");
  SolverSchedule s;
  s.rules.assign(static_cast<std::size_t>(b), BlockRule::exact_min());
  for (int i : rgd_blocks) {
    require(i >= 0 && i < b - 1, "blended_schedule: gradient blocks must come before the last");
    s.rules[static_cast<std::size_t>(i)] = BlockRule::rgd(policy);
  }
  s.blended_init = true;
  return s;
}

inline SolverSchedule uniform_schedule(int b, BlockRule r, bool blended = false) {
  require(b >= 1, "uniform_schedule: need at least one block");
  SolverSchedule s;
  s.rules.assign(static_cast<std::size_t>(b), std::move(r));
  s.blended_init = blended;
  return s;
}

// ---------------------------------------------------------------------------
// Gradient scope: which leading blocks contribute to the stationarity
// measure recorded at sweep starts.  Blended runs keep the last block
// coordinate-wise optimal, so its contribution is identically zero and the
// recorded norm covers the first b-1 blocks; the same scope is the only
// well-defined one when the last block is non-smooth.
// ---------------------------------------------------------------------------

enum class GradScope { Full, FirstBm1, None };

inline std::string scope_name(GradScope s) {
  switch (s) {
    case GradScope::Full: return "full";
    case GradScope::FirstBm1: return "first_bm1";
    case GradScope::None: return "none";
  }
  throw std::logic_error("scope_name: bad scope");
}

inline GradScope scope_from_name(const std::string& s) {
  if (s == "full") return GradScope::Full;
  if (s == "first_bm1") return GradScope::FirstBm1;
  if (s == "none") return GradScope::None;
  throw std::invalid_argument("unknown gradient scope: " + s);
}

inline int scope_block_count(GradScope s, int b) {
  return s == GradScope::Full ? b : s == GradScope::FirstBm1 ? b - 1 : 0;
}

inline GradScope grad_scope_of(const Problem& p, const SolverSchedule& sched) {
  const int b = p.num_blocks();
  bool first_smooth = true;
  for (int i = 0; i + 1 < b; ++i) first_smooth = first_smooth && p.block_spec(i).smooth();
  const bool all_smooth = first_smooth && p.block_spec(b - 1).smooth();
  if (!sched.blended_init && all_smooth) return GradScope::Full;
  if (first_smooth && b >= 2) return GradScope::FirstBm1;
  return GradScope::None;
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

// One record per block update, plus an i = 0 snapshot at each sweep start and
// (for blended runs) a t = -1 record for the pre-sweep exact minimization.
//
// grad holds: the scope gradient norm (snapshots); ||rgrad_i F|| at the mixed
// iterate before the update (smooth blocks); the distance moved to the block
// optimum (exact minimization on non-smooth blocks); NaN otherwise.
struct TraceRecord {
  int t = 0;
  int i = 0;  // 1-based block index; 0 = sweep-start snapshot
  double f = 0.0;
  double grad = 0.0;
  double step_norm = 0.0;
  double step_size = 0.0;  // accepted gradient step; 0 for other rules
  double elapsed_s = 0.0;  // stays 0 unless wall-time recording is enabled
};

enum class StopReason { SweepBudget, GradNorm, ObjectiveDecrease, TargetValue, WallClock };

inline std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::SweepBudget: return "sweep_budget";
    case StopReason::GradNorm: return "grad_norm";
    case StopReason::ObjectiveDecrease: return "objective_decrease";
    case StopReason::TargetValue: return "target_value";
    case StopReason::WallClock: return "wall_clock";
  }
  throw std::logic_error("stop_reason_name: bad reason");
}

struct TraceMeta {
  std::string problem;
  int num_blocks = 0;
  std::vector<std::string> rules;  // per block
  GradScope scope = GradScope::None;
  bool blended = false;
  std::uint64_t seed = 0;
  std::vector<double> step_smoothness;  // L behind inverse-smoothness steps; NaN elsewhere
  std::uint64_t instance_seed = 0;      // for rebuilding the instance from the trace
  std::string problem_params;           // compact JSON parameter record; may be empty
};

struct RunTrace {
  TraceMeta meta;
  std::vector<TraceRecord> records;
  ProductPoint final_point;
  double final_value = std::numeric_limits<double>::quiet_NaN();
  StopReason stop_reason = StopReason::SweepBudget;
  int sweeps_executed = 0;
  std::vector<std::pair<int, int>> degenerate_events;  // (sweep, block): kept previous value
  std::vector<std::pair<int, int>> stalled_blocks;     // backtracking exhausted; zero step
};

// Scope gradient norm at the last sweep-start snapshot (NaN when absent).
inline double last_snapshot_grad(const RunTrace& tr) {
  for (auto it = tr.records.rbegin(); it != tr.records.rend(); ++it)
    if (it->i == 0) return it->grad;
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Schedule validation
// ---------------------------------------------------------------------------

inline void validate_schedule(const Problem& p, const SolverSchedule& s) {
  const int b = p.num_blocks();
  require(static_cast<int>(s.rules.size()) == b, "schedule: need one rule per block");
  require(s.stop.max_sweeps >= 0, "schedule: max_sweeps must be nonnegative");
  for (int i = 0; i < b; ++i) {
    const std::string tag = p.name() + " block " + std::to_string(i + 1);
    const BlockRule& r = s.rules[static_cast<std::size_t>(i)];
    switch (r.rule) {
      case Rule::ExactMin:
        require(p.has_exact_min(i), tag + ": no exact block minimizer");
        break;
      case Rule::MajorizeMin:
        require(p.has_majorizer(i), tag + ": no majorizer");
        break;
      case Rule::RiemannianGd: {
        require(p.block_spec(i).smooth(),
                tag + ": rule incompatible with block (gradient step on " +
                    p.block_spec(i).describe() + ")");
        const StepPolicy& sp = r.step;
        switch (sp.kind) {
          case StepKind::Constant:
            require(sp.constant > 0.0, tag + ": constant step must be positive");
            break;
          case StepKind::InverseSmoothness:
            require(sp.smoothness > 0.0 && sp.safety > 0.0,
                    tag + ": inverse-smoothness step needs positive L and safety");
            break;
          case StepKind::Backtracking:
            require(sp.start > 0.0 && sp.shrink > 0.0 && sp.shrink < 1.0 && sp.armijo > 0.0 &&
                        sp.armijo < 1.0 && sp.max_backtracks >= 1,
                    tag + ": bad backtracking parameters");
            break;
        }
        break;
      }
    }
  }
  if (s.blended_init) {
    require(b >= 2, "blended schedule: need at least two blocks");
    require(s.rules.back().rule == Rule::ExactMin,
            "blended schedule: last block must use exact minimization");
  }
}

// ---------------------------------------------------------------------------
// Block steps and sweeps
// ---------------------------------------------------------------------------

struct SolveOptions {
  bool check_majorizer = true;
  int reproject_every = 100;      // sweeps between feasibility reprojections; 0 disables
  bool record_wall_time = false;  // off keeps traces bit-reproducible
  std::uint64_t seed = 0;         // recorded in trace metadata
};

// Gradient step on block i from the current mixed iterate.  Returns the new
// block value, the accepted step length (0 when backtracking stalls), and
// whether the line search stalled.
struct RgdStep {
  VectorXd point;
  double step_size = 0.0;
  bool stalled = false;
};

inline RgdStep rgd_block_step(const Problem& p, int i, const ProductPoint& x, double f_current,
                              const StepPolicy& sp) {
  const ManifoldSpec& spec = p.block_spec(i);
  require(spec.smooth(), p.name() + ": gradient step on non-smooth block");
  const VectorXd g = riemannian_block_grad(p, i, x);
  const double gsq = g.squaredNorm();
  if (sp.kind == StepKind::Constant)
    return {retract(spec, x.block(i), VectorXd(-sp.constant * g)), sp.constant, false};
  if (sp.kind == StepKind::InverseSmoothness) {
    const double lambda = sp.safety / sp.smoothness;
    return {retract(spec, x.block(i), VectorXd(-lambda * g)), lambda, false};
  }
  double lambda = sp.start;
  for (int k = 0; k < sp.max_backtracks; ++k) {
    VectorXd cand = retract(spec, x.block(i), VectorXd(-lambda * g));
    const double fc = p.value(with_block(x, i, cand));
    if (fc <= f_current - sp.armijo * lambda * gsq) return {std::move(cand), lambda, false};
    lambda *= sp.shrink;
  }
  return {x.block(i), 0.0, true};
}

// Majorize-minimize step on block i anchored at the current mixed iterate.
inline VectorXd mm_block_step(const Problem& p, int i, const ProductPoint& x) {
  return p.majorizer(i).minimize(x);
}

struct SweepOutcome {
  double f = 0.0;  // objective after the sweep
  std::vector<TraceRecord> records;
  std::vector<int> degenerate_blocks;
  std::vector<int> stalled_blocks;
};

// One cyclic pass: block i is updated from the mixed iterate holding blocks
// 1..i-1 at their new values and i+1..b at their old ones.  The objective is
// evaluated after every block; any increase beyond 1e-10 * (1 + |F|) aborts,
// as does a majorizer falling below the objective at the visited point.
inline SweepOutcome sweep(const Problem& p, const SolverSchedule& sched, ProductPoint& x, int t,
                          double f_start, const SolveOptions& opt = {}) {
  constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
  const int b = p.num_blocks();
  SweepOutcome out;
  double f = f_start;
  for (int i = 0; i < b; ++i) {
    const BlockRule& br = sched.rules[static_cast<std::size_t>(i)];
    const bool smooth_i = p.block_spec(i).smooth();
    const VectorXd xi_old = x.block(i);
    double grad_rec = smooth_i ? riemannian_block_grad(p, i, x).norm() : kNan;
    double step_size = 0.0;
    std::optional<double> f_known;
    switch (br.rule) {
      case Rule::ExactMin: {
        BlockResult r = p.exact_min(i, x);
        if (r.degenerate) {
          // Non-unique minimizer: keep the previous iterate (feasible, equal
          // objective) and log instead of picking a side silently.
          out.degenerate_blocks.push_back(i);
          f_known = f;
        } else {
          x.block(i) = std::move(r.point);
        }
        break;
      }
      case Rule::MajorizeMin: {
        const Majorizer& m = p.majorizer(i);
        VectorXd xi_new = m.minimize(x);
        if (opt.check_majorizer) {
          const double g_new = m.value(xi_new, x);
          ProductPoint xn = with_block(x, i, std::move(xi_new));
          const double f_new = p.value(xn);
          if (g_new < f_new - 1e-8 * (1.0 + std::abs(f_new)))
            throw majorizer_error("surrogate fell below the objective at sweep " +
                                      std::to_string(t) + ", block " + std::to_string(i + 1),
                                  t, i, g_new, f_new);
          x = std::move(xn);
          f_known = f_new;
        } else {
          x.block(i) = std::move(xi_new);
        }
        break;
      }
      case Rule::RiemannianGd: {
        RgdStep s = rgd_block_step(p, i, x, f, br.step);
        if (s.stalled) {
          out.stalled_blocks.push_back(i);
          f_known = f;  // zero step: objective unchanged
        }
        step_size = s.step_size;
        x.block(i) = std::move(s.point);
        break;
      }
    }
    const double f_after = f_known ? *f_known : p.value(x);
    if (f_after > f + 1e-10 * (1.0 + std::abs(f)))
      throw monotonicity_error("objective increased at sweep " + std::to_string(t) + ", block " +
                                   std::to_string(i + 1),
                               t, i, f, f_after);
    const double step_norm = (x.block(i) - xi_old).norm();
    if (!smooth_i && br.rule == Rule::ExactMin) grad_rec = step_norm;
    out.records.push_back({t, i + 1, f_after, grad_rec, step_norm, step_size, 0.0});
    f = f_after;
  }
  out.f = f;
  return out;
}

// ---------------------------------------------------------------------------
// Full runs
// ---------------------------------------------------------------------------

inline RunTrace run(const Problem& p, const SolverSchedule& sched, ProductPoint x,
                    const SolveOptions& opt = {}) {
  validate_schedule(p, sched);
  constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
  const int b = p.num_blocks();
  const GradScope scope = grad_scope_of(p, sched);
  const int scope_blocks = scope_block_count(scope, b);

  RunTrace tr;
  tr.meta.problem = p.name();
  tr.meta.num_blocks = b;
  tr.meta.scope = scope;
  tr.meta.blended = sched.blended_init;
  tr.meta.seed = opt.seed;
  tr.meta.step_smoothness.assign(static_cast<std::size_t>(b), kNan);
  for (int i = 0; i < b; ++i) {
    const BlockRule& r = sched.rules[static_cast<std::size_t>(i)];
    tr.meta.rules.push_back(rule_name(r.rule));
    if (r.rule == Rule::RiemannianGd && r.step.kind == StepKind::InverseSmoothness)
      tr.meta.step_smoothness[static_cast<std::size_t>(i)] = r.step.smoothness;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const auto wall = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const auto stamp = [&](double v) { return opt.record_wall_time ? v : 0.0; };

  double f = p.value(x);

  if (sched.blended_init) {
    const int last = b - 1;
    BlockResult r = p.exact_min(last, x);
    double step_norm = 0.0;
    if (r.degenerate) {
      tr.degenerate_events.emplace_back(-1, last);
    } else {
      step_norm = (r.point - x.block(last)).norm();
      x.block(last) = std::move(r.point);
      const double f_init = p.value(x);
      if (f_init > f + 1e-10 * (1.0 + std::abs(f)))
        throw monotonicity_error("objective increased during blended initialization", -1, last, f,
                                 f_init);
      f = f_init;
    }
    tr.records.push_back({-1, b, f, 0.0, step_norm, 0.0, stamp(wall())});
  }

  StopReason reason = StopReason::SweepBudget;
  double prev_f = kNan;
  const StopRules& stop = sched.stop;
  if (stop.max_sweeps > 0) {
    for (int t = 0;; ++t) {
      const double scope_g =
          scope_blocks > 0 ? riemannian_grad_norm(p, x, scope_blocks) : kNan;
      tr.records.push_back({t, 0, f, scope_g, 0.0, 0.0, stamp(wall())});
      if (stop.grad_norm_tol && scope_blocks > 0 && scope_g <= *stop.grad_norm_tol) {
        reason = StopReason::GradNorm;
        break;
      }
      if (stop.target_value && f <= *stop.target_value + stop.target_slack) {
        reason = StopReason::TargetValue;
        break;
      }
      if (t > 0 && stop.objective_decrease_tol && prev_f - f <= *stop.objective_decrease_tol) {
        reason = StopReason::ObjectiveDecrease;
        break;
      }
      if (t >= stop.max_sweeps) {
        reason = StopReason::SweepBudget;
        break;
      }
      if (stop.wall_clock_s && wall() > *stop.wall_clock_s) {
        reason = StopReason::WallClock;
        break;
      }
      prev_f = f;

      SweepOutcome sw = sweep(p, sched, x, t, f, opt);
      const double now = stamp(wall());
      for (TraceRecord& rec : sw.records) {
        rec.elapsed_s = now;
        tr.records.push_back(rec);
      }
      for (int i : sw.degenerate_blocks) tr.degenerate_events.emplace_back(t, i);
      for (int i : sw.stalled_blocks) tr.stalled_blocks.emplace_back(t, i);
      f = sw.f;
      tr.sweeps_executed = t + 1;

      if (opt.reproject_every > 0 && (t + 1) % opt.reproject_every == 0) {
        for (int i = 0; i < b; ++i) x.block(i) = reproject(p.block_spec(i), x.block(i));
        f = p.value(x);
      }
    }
  }

  tr.final_point = std::move(x);
  tr.final_value = f;
  tr.stop_reason = reason;
  return tr;
}

inline RunTrace run_from_seed(const Problem& p, const SolverSchedule& sched, std::uint64_t seed,
                              SolveOptions opt = {}) {
  Rng rng(splitmix64(seed));
  opt.seed = seed;
  return run(p, sched, random_product_point(p.blocks(), rng), opt);
}

// ---------------------------------------------------------------------------
// Seeded restarts
// ---------------------------------------------------------------------------

struct RestartRun {
  std::uint64_t seed = 0;
  double final_value = 0.0;
  int sweeps = 0;
  StopReason reason = StopReason::SweepBudget;
  double final_grad = 0.0;  // scope gradient at the last snapshot; NaN when absent
};

struct RestartResult {
  RunTrace best;
  int best_index = -1;
  std::vector<RestartRun> runs;
};

// Independent seeded runs from random initial points; sub-seeds are derived
// from the master seed, so results do not depend on the thread count.
inline RestartResult restart_driver(const Problem& p, const SolverSchedule& sched, int n_restarts,
                                    std::uint64_t master_seed, const SolveOptions& opt = {},
                                    int n_threads = 1) {
  require(n_restarts >= 1, "restart_driver: need at least one restart");
  validate_schedule(p, sched);
  const int workers = std::max(1, std::min(n_threads, n_restarts));

  std::vector<std::optional<RunTrace>> traces(static_cast<std::size_t>(n_restarts));
  std::vector<RestartRun> rows(static_cast<std::size_t>(n_restarts));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_restarts));

  const auto work = [&](int first) {
    for (int k = first; k < n_restarts; k += workers) {
      try {
        const std::uint64_t seed = splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(k) + 1));
        Rng rng(seed);
        SolveOptions o = opt;
        o.seed = seed;
        RunTrace t = run(p, sched, random_product_point(p.blocks(), rng), o);
        rows[static_cast<std::size_t>(k)] = {seed, t.final_value, t.sweeps_executed, t.stop_reason,
                                             last_snapshot_grad(t)};
        traces[static_cast<std::size_t>(k)] = std::move(t);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }

  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  int best = 0;
  for (int k = 1; k < n_restarts; ++k)
    if (rows[static_cast<std::size_t>(k)].final_value < rows[static_cast<std::size_t>(best)].final_value)
      best = k;

  RestartResult out;
  out.best = std::move(*traces[static_cast<std::size_t>(best)]);
  out.best_index = best;
  out.runs = std::move(rows);
  return out;
}

}  // namespace mbcd
