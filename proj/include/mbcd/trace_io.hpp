#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mbcd/diagnostics.hpp"

namespace mbcd {

// ---------------------------------------------------------------------------
// Trace files: '#'-prefixed metadata header, then one whitespace-delimited
// record per line in the fixed order
//   t  i  f  grad  step_norm  step_size  elapsed_s
// with numbers printed to 17 significant digits, so write -> read is exact.
// ---------------------------------------------------------------------------

inline std::string format_trace(const RunTrace& tr) {
  std::ostringstream os;
  os << "# mbcd-trace 1\n";
  os << "# problem " << tr.meta.problem << "\n";
  os << "# blocks " << tr.meta.num_blocks << "\n";
  os << "# rules";
  for (const auto& r : tr.meta.rules) os << ' ' << r;
  os << "\n";
  os << "# scope " << scope_name(tr.meta.scope) << "\n";
  os << "# blended " << (tr.meta.blended ? 1 : 0) << "\n";
  os << "# seed " << tr.meta.seed << "\n";
  os << "# instance_seed " << tr.meta.instance_seed << "\n";
  if (!tr.meta.problem_params.empty()) os << "# problem_params " << tr.meta.problem_params << "\n";
  os << "# step_smoothness";
  for (double l : tr.meta.step_smoothness) os << ' ' << fmt17(l);
  os << "\n";
  os << "# stop_reason " << stop_reason_name(tr.stop_reason) << "\n";
  os << "# sweeps " << tr.sweeps_executed << "\n";
  os << "# final_value " << fmt17(tr.final_value) << "\n";
  os << "# columns t i f grad step_norm step_size elapsed_s\n";
  for (const TraceRecord& r : tr.records)
    os << r.t << ' ' << r.i << ' ' << fmt17(r.f) << ' ' << fmt17(r.grad) << ' '
       << fmt17(r.step_norm) << ' ' << fmt17(r.step_size) << ' ' << fmt17(r.elapsed_s) << "\n";
  return os.str();
}

// Stream extraction of doubles rejects "nan"/"inf", which traces contain
// legitimately; strtod accepts them.
inline double parse_trace_number(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  require(end != tok.c_str() && *end == '\0', "trace: bad number: " + tok);
  return v;
}

inline int parse_trace_int(const std::string& tok) {
  std::size_t used = 0;
  const int v = std::stoi(tok, &used);
  require(used == tok.size(), "trace: bad integer: " + tok);
  return v;
}

// Parses the output of format_trace.  The final point is not part of the
// file; everything a certificate needs is.
inline RunTrace parse_trace(std::istream& in) {
  RunTrace tr;
  bool versioned = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line);
      std::string hash, key;
      ls >> hash >> key;
      if (key == "mbcd-trace") {
        int v = 0;
        ls >> v;
        require(v == 1, "trace: unsupported version");
        versioned = true;
      } else if (key == "problem") {
        ls >> tr.meta.problem;
      } else if (key == "blocks") {
        ls >> tr.meta.num_blocks;
      } else if (key == "rules") {
        std::string r;
        while (ls >> r) tr.meta.rules.push_back(r);
      } else if (key == "scope") {
        std::string s;
        ls >> s;
        tr.meta.scope = scope_from_name(s);
      } else if (key == "blended") {
        int b = 0;
        ls >> b;
        tr.meta.blended = b != 0;
      } else if (key == "seed") {
        ls >> tr.meta.seed;
      } else if (key == "instance_seed") {
        ls >> tr.meta.instance_seed;
      } else if (key == "problem_params") {
        ls >> tr.meta.problem_params;
      } else if (key == "step_smoothness") {
        std::string tok;
        while (ls >> tok) tr.meta.step_smoothness.push_back(parse_trace_number(tok));
      } else if (key == "stop_reason") {
        std::string s;
        ls >> s;
        for (StopReason r : {StopReason::SweepBudget, StopReason::GradNorm,
                             StopReason::ObjectiveDecrease, StopReason::TargetValue,
                             StopReason::WallClock})
          if (stop_reason_name(r) == s) tr.stop_reason = r;
      } else if (key == "sweeps") {
        ls >> tr.sweeps_executed;
      } else if (key == "final_value") {
        std::string tok;
        ls >> tok;
        tr.final_value = parse_trace_number(tok);
      }
      // Unknown header keys are ignored; "columns" is documentation.
      continue;
    }
    std::istringstream ls(line);
    std::string tok[7];
    for (auto& t : tok)
      require(static_cast<bool>(ls >> t), "trace: malformed record: " + line);
    TraceRecord r;
    r.t = parse_trace_int(tok[0]);
    r.i = parse_trace_int(tok[1]);
    r.f = parse_trace_number(tok[2]);
    r.grad = parse_trace_number(tok[3]);
    r.step_norm = parse_trace_number(tok[4]);
    r.step_size = parse_trace_number(tok[5]);
    r.elapsed_s = parse_trace_number(tok[6]);
    tr.records.push_back(r);
  }
  require(versioned, "trace: missing 'mbcd-trace' header");
  require(tr.meta.num_blocks >= 1, "trace: missing block count");
  require(static_cast<int>(tr.meta.rules.size()) == tr.meta.num_blocks,
          "trace: rule count does not match block count");
  return tr;
}

// Writes are staged to a sibling temp file and atomically renamed into
// place, so concurrent readers never observe a partial file.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    require(out.good(), "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_trace(const RunTrace& tr, const std::filesystem::path& path) {
  atomic_write_file(path, format_trace(tr));
}

inline RunTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open trace file: " + path.string());
  return parse_trace(in);
}

// ---------------------------------------------------------------------------
// Flat key-value summaries as a two-line CSV (header row + value row).
// ---------------------------------------------------------------------------

struct SummaryRow {
  std::vector<std::pair<std::string, std::string>> fields;

  void add(const std::string& key, const std::string& v) { fields.emplace_back(key, v); }
  void add(const std::string& key, double v) { fields.emplace_back(key, fmt17(v)); }
  void add(const std::string& key, int v) { fields.emplace_back(key, std::to_string(v)); }
  void add(const std::string& key, std::uint64_t v) { fields.emplace_back(key, std::to_string(v)); }
};

inline std::string format_summary(const SummaryRow& row) {
  std::ostringstream keys, vals;
  for (std::size_t k = 0; k < row.fields.size(); ++k) {
    if (k) {
      keys << ',';
      vals << ',';
    }
    keys << row.fields[k].first;
    vals << row.fields[k].second;
  }
  keys << '\n' << vals.str() << '\n';
  return keys.str();
}

inline SummaryRow summarize_run(const RunTrace& tr) {
  SummaryRow row;
  row.add("problem", tr.meta.problem);
  row.add("blocks", tr.meta.num_blocks);
  row.add("blended", tr.meta.blended ? 1 : 0);
  row.add("seed", tr.meta.seed);
  row.add("sweeps", tr.sweeps_executed);
  row.add("stop_reason", stop_reason_name(tr.stop_reason));
  row.add("final_value", tr.final_value);
  row.add("final_grad", last_snapshot_grad(tr));
  row.add("records", static_cast<int>(tr.records.size()));
  row.add("degenerate_events", static_cast<int>(tr.degenerate_events.size()));
  row.add("stalled_blocks", static_cast<int>(tr.stalled_blocks.size()));
  return row;
}

// ---------------------------------------------------------------------------
// Certificate reports, serialized in the same header + records shape.
// ---------------------------------------------------------------------------

inline std::string format_certificate(const RateCertificate& cert) {
  std::ostringstream os;
  os << "# mbcd-certificate 1\n";
  os << "# mode " << rate_mode_name(cert.mode) << "\n";
  os << "# c_constant " << fmt17(cert.c_constant) << "\n";
  os << "# scope_blocks " << cert.scope_blocks << "\n";
  os << "# result " << (cert.pass ? "PASS" : "FAIL") << "\n";
  os << "# worst_margin " << fmt17(cert.worst_margin) << "\n";
  os << "# worst_prefix " << cert.worst_prefix << "\n";
  os << "# columns T lhs rhs margin\n";
  for (const PrefixCheck& c : cert.checks)
    os << c.T << ' ' << fmt17(c.lhs) << ' ' << fmt17(c.rhs) << ' ' << fmt17(c.margin) << "\n";
  return os.str();
}

inline void write_certificate(const RateCertificate& cert, const std::filesystem::path& path) {
  atomic_write_file(path, format_certificate(cert));
}

}  // namespace mbcd
