// ddenoc: scenario-driven front end.
//
//   ddenoc run <scenario.json> [--out DIR] [--threads N] [--log-level L]
//   ddenoc validate <scenario.json>
//
// Exit status: 0 success, 1 runtime failure, 2 validation failure.
#include "ddenoc/scenario.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

std::filesystem::path output_root(const std::string& flag, const ddenoc::Scenario& sc) {
  if (!flag.empty()) return flag;
  if (!sc.output_dir.empty()) return sc.output_dir;
  if (const char* env = std::getenv("DDENOC_OUT"); env != nullptr && *env != '\0') return env;
  return "out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal control and stability analysis of delay differential equations"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  int threads = 1;
  std::string log_level = "info";

  auto* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Output directory (default: scenario output_dir, $DDENOC_OUT, ./out)");
  run->add_option("--threads", threads, "Worker threads for the stability scan")->check(CLI::PositiveNumber);
  run->add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto* validate = app.add_subcommand("validate", "Check a scenario file against the schema");
  validate->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  ddenoc::Scenario scenario;
  try {
    scenario = ddenoc::load_scenario(scenario_path);
  } catch (const ddenoc::ScenarioError& e) {
    std::cerr << "invalid scenario " << scenario_path << ": field " << e.field() << ": " << e.what() << '\n';
    return kExitValidation;
  }
  if (validate->parsed()) {
    std::cout << scenario_path << ": ok (" << ddenoc::kind_name(scenario.kind) << ")\n";
    return kExitOk;
  }

  try {
    ddenoc::RunOptions options;
    options.out_dir = output_root(out_dir, scenario);
    options.threads = threads;
    const ddenoc::RunResult result = ddenoc::run_scenario(scenario, options);
    std::cout << result.summary.dump(2) << '\n';
    for (const auto& a : result.artifacts) std::cout << (result.directory / a.file).string() << '\n';
    if (!result.success) {
      std::cerr << "scenario " << scenario.name << " failed: " << result.status << " (artifacts kept)\n";
      return kExitRuntime;
    }
  } catch (const ddenoc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
