#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "mbcd/trace_io.hpp"

namespace mbcd {
namespace {

namespace fs = std::filesystem;

RunTrace sample_trace() {
  RunTrace tr;
  tr.meta.problem = "toy";
  tr.meta.num_blocks = 2;
  tr.meta.rules = {"rgd", "exact_min"};
  tr.meta.scope = GradScope::Full;
  tr.meta.blended = true;
  tr.meta.seed = 42;
  tr.meta.instance_seed = 7;
  tr.meta.problem_params = "{\"m\":200,\"c\":[2,2]}";
  tr.meta.step_smoothness = {12.5, std::numeric_limits<double>::quiet_NaN()};
  tr.stop_reason = StopReason::GradNorm;
  tr.sweeps_executed = 2;
  tr.final_value = -0.125;
  tr.records = {
      {-1, 2, 3.5, 0.0, 1.0, 0.0, 0.0},
      {0, 0, 3.5, 0.7071067811865476, 0.0, 0.0, 0.0},
      {0, 1, 3.25, 0.5, 0.25, 0.08, 0.0},
      {0, 2, 3.0, std::numeric_limits<double>::quiet_NaN(), 0.125, 0.0, 0.0},
      {1, 0, 3.0, 1e-9, 0.0, 0.0, 0.0},
  };
  return tr;
}

TEST(TraceIo, FormatParseRoundTripIsExact) {
  const RunTrace tr = sample_trace();
  std::istringstream in(format_trace(tr));
  const RunTrace back = parse_trace(in);

  EXPECT_EQ(back.meta.problem, tr.meta.problem);
  EXPECT_EQ(back.meta.num_blocks, tr.meta.num_blocks);
  EXPECT_EQ(back.meta.rules, tr.meta.rules);
  EXPECT_EQ(back.meta.scope, tr.meta.scope);
  EXPECT_EQ(back.meta.blended, tr.meta.blended);
  EXPECT_EQ(back.meta.seed, tr.meta.seed);
  EXPECT_EQ(back.meta.instance_seed, tr.meta.instance_seed);
  EXPECT_EQ(back.meta.problem_params, tr.meta.problem_params);
  ASSERT_EQ(back.meta.step_smoothness.size(), 2u);
  EXPECT_EQ(back.meta.step_smoothness[0], 12.5);
  EXPECT_TRUE(std::isnan(back.meta.step_smoothness[1]));
  EXPECT_EQ(back.stop_reason, tr.stop_reason);
  EXPECT_EQ(back.sweeps_executed, tr.sweeps_executed);
  EXPECT_EQ(back.final_value, tr.final_value);

  ASSERT_EQ(back.records.size(), tr.records.size());
  for (std::size_t k = 0; k < tr.records.size(); ++k) {
    EXPECT_EQ(back.records[k].t, tr.records[k].t);
    EXPECT_EQ(back.records[k].i, tr.records[k].i);
    EXPECT_EQ(back.records[k].f, tr.records[k].f);
    if (std::isnan(tr.records[k].grad)) EXPECT_TRUE(std::isnan(back.records[k].grad));
    else EXPECT_EQ(back.records[k].grad, tr.records[k].grad);
    EXPECT_EQ(back.records[k].step_norm, tr.records[k].step_norm);
    EXPECT_EQ(back.records[k].step_size, tr.records[k].step_size);
    EXPECT_EQ(back.records[k].elapsed_s, tr.records[k].elapsed_s);
  }
}

TEST(TraceIo, FormattingIsByteStable) {
  EXPECT_EQ(format_trace(sample_trace()), format_trace(sample_trace()));
}

TEST(TraceIo, UnknownHeaderKeysAreIgnored) {
  std::string text = format_trace(sample_trace());
  text.insert(text.find("# columns"), "# future_extension 3 tokens\n");
  std::istringstream in(text);
  EXPECT_EQ(parse_trace(in).records.size(), 5u);
}

TEST(TraceIo, RejectsMalformedInput) {
  const auto reject = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(parse_trace(in), std::invalid_argument) << text;
  };
  reject("");                                       // no version header
  reject("# problem toy\n# blocks 1\n# rules rgd\n");  // still unversioned
  reject("# mbcd-trace 2\n# blocks 1\n# rules rgd\n");  // wrong version
  reject("# mbcd-trace 1\n# rules rgd\n");          // missing block count
  reject("# mbcd-trace 1\n# blocks 2\n# rules rgd\n");  // rule count mismatch
  reject("# mbcd-trace 1\n# blocks 1\n# rules rgd\n0 1 2.0\n");  // short record
  reject("# mbcd-trace 1\n# blocks 1\n# rules rgd\n0 1 x 0 0 0 0\n");  // bad number
  reject("# mbcd-trace 1\n# blocks 1\n# rules rgd\n0.5 1 0 0 0 0 0\n");  // bad index
}

TEST(TraceIo, FileRoundTripThroughAtomicWrite) {
  const fs::path dir = fs::temp_directory_path() / "mbcd-trace-io-test";
  fs::create_directories(dir);
  const fs::path path = dir / "trace.txt";
  const RunTrace tr = sample_trace();
  write_trace(tr, path);
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));  // staging file renamed away
  const RunTrace back = read_trace(path);
  EXPECT_EQ(back.final_value, tr.final_value);
  EXPECT_EQ(back.records.size(), tr.records.size());

  atomic_write_file(path, "# mbcd-trace 1\n# blocks 1\n# rules rgd\n");
  EXPECT_EQ(read_trace(path).records.size(), 0u);  // overwrite replaced the content
  fs::remove_all(dir);
}

TEST(TraceIo, ReadMissingFileFails) {
  EXPECT_THROW(read_trace("/nonexistent/mbcd/trace.txt"), std::invalid_argument);
}

TEST(SummaryFormat, TwoLineCsv) {
  SummaryRow row;
  row.add("problem", std::string("toy"));
  row.add("final_value", 0.5);
  row.add("sweeps", 3);
  EXPECT_EQ(format_summary(row), "problem,final_value,sweeps\ntoy,0.5,3\n");
}

TEST(SummaryFormat, SummarizeRunCoversRunFacts) {
  const RunTrace tr = sample_trace();
  const std::string text = format_summary(summarize_run(tr));
  EXPECT_NE(text.find("problem,"), std::string::npos);
  EXPECT_NE(text.find("stop_reason"), std::string::npos);
  EXPECT_NE(text.find("grad_norm"), std::string::npos);   // the recorded stop reason
  EXPECT_NE(text.find("final_value"), std::string::npos);
  EXPECT_NE(text.find("toy,"), std::string::npos);
  // Exactly two lines.
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(CertificateFormat, CarriesResultAndChecks) {
  RateCertificate cert;
  cert.mode = RateMode::Blended;
  cert.c_constant = 4.0;
  cert.scope_blocks = 1;
  cert.pass = false;
  cert.worst_margin = 0.25;
  cert.worst_prefix = 3;
  cert.checks = {{0, 1.0, 2.0, -0.5}, {3, 1.0, 0.8, 0.25}};
  const std::string text = format_certificate(cert);
  EXPECT_NE(text.find("# mbcd-certificate 1\n"), std::string::npos);
  EXPECT_NE(text.find("# mode thm4\n"), std::string::npos);
  EXPECT_NE(text.find("# result FAIL\n"), std::string::npos);
  EXPECT_NE(text.find("# worst_margin 0.25\n"), std::string::npos);
  EXPECT_NE(text.find("\n3 1 0.80000000000000004 0.25\n"), std::string::npos);
  cert.pass = true;
  EXPECT_NE(format_certificate(cert).find("# result PASS\n"), std::string::npos);
}

}  // namespace
}  // namespace mbcd
