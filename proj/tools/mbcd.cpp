#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mbcd: block-coordinate descent over products of manifolds"};
  app.require_subcommand(1);

  std::string config_path, out_dir, trace_path, report_path, mode;
  int samples = 200;

  CLI::App* run = app.add_subcommand("run", "solve a configured problem instance");
  run->add_option("--config", config_path, "run configuration (JSON)")->required();
  run->add_option("--out", out_dir, "output directory")->required();

  CLI::App* audit = app.add_subcommand("audit", "check gradients, surrogates, and feasibility");
  audit->add_option("--config", config_path, "run configuration (JSON)")->required();

  CLI::App* certify = app.add_subcommand("certify", "check a trace against its rate bound");
  certify->add_option("--trace", trace_path, "trace file from a run")->required();
  certify->add_option("--report", report_path, "certificate output path")->required();
  certify->add_option("--mode", mode, "bound to check: thm3, thm4, or bmm")
      ->required()
      ->check(CLI::IsMember({"thm3", "thm4", "bmm"}));
  certify->add_option("--samples", samples, "constant-estimation sample count")
      ->check(CLI::PositiveNumber);

  app.add_subcommand("list", "list available problems and block capabilities");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mbcd::cli::kExitConfig;
  }

  if (run->parsed()) return mbcd::cli::cmd_run(config_path, out_dir, std::cout, std::cerr);
  if (audit->parsed()) return mbcd::cli::cmd_audit(config_path, std::cout, std::cerr);
  if (certify->parsed())
    return mbcd::cli::cmd_certify(trace_path, report_path, mode, samples, std::cout, std::cerr);
  return mbcd::cli::cmd_list(std::cout);
}
