#pragma once

#include "ddenoc/msr_model.hpp"
#include "ddenoc/nlp.hpp"
#include "ddenoc/simulate.hpp"
#include "ddenoc/stability.hpp"
#include "ddenoc/trajectory.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ddenoc {

inline constexpr int kSchemaVersion = 1;

/// A schema violation; `field` is the JSON path of the offending entry.
class ScenarioError : public ConfigError {
 public:
  ScenarioError(std::string field, const std::string& what)
      : ConfigError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class ScenarioKind { steady_state, stability, track, simulate, compare };
const char* kind_name(ScenarioKind kind);

struct OperatingPoint {
  double v = 4.0;         ///< m/s
  double rho_ext = 50.0;  ///< pcm
  double q = 1.0;         ///< MW
};

struct SetpointStep {
  double t_start = 0.0;
  double q_sp = 1.0;
};

struct TrackSettings {
  double t0 = 0.0;
  double tf = 3000.0;
  double dt = 30.0;
  int steps_per_interval = 1;
  std::vector<double> rate_weights{1e-2, 1e2};  ///< diagonal of W, input order (rho_ext, v)
  double w_q = 1.0;
  Vec u_min = (Vec(2) << -1000.0, 0.5).finished();
  Vec u_max = (Vec(2) << 1000.0, 10.0).finished();
  Vec u_ref = (Vec(2) << 50.0, 4.0).finished();
  Vec u_guess = (Vec(2) << 50.0, 4.0).finished();
  std::vector<std::pair<std::string, std::pair<double, double>>> state_bounds;
  std::vector<SetpointStep> setpoints{{0.0, 1.0}, {300.0, 2.5}};

  int intervals() const;
  double setpoint(double t) const;
};

struct InputStep {
  double t_start = 0.0;
  double rho_ext = 50.0;
  double v = 4.0;
};

struct SimulateSettings {
  double tf = 500.0;
  std::vector<InputStep> inputs;  ///< empty: hold the operating point inputs
  bool linearized = false;        ///< also run the delay-linearized system
};

struct CompareSettings {
  std::string a;
  std::string b;
  std::string output = "Q_g";
};

struct StabilitySettings {
  ScanWindow window;
  bool dump_field = false;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name;
  ScenarioKind kind = ScenarioKind::steady_state;
  msr::MsrParams params;
  OperatingPoint op;
  TrackSettings track;
  SimulateSettings simulate;
  CompareSettings compare;
  StabilitySettings stability;
  SolveOptions solver;
  SimOptions sim;
  std::string output_dir;            ///< empty: decided by the caller
  std::filesystem::path base_dir;    ///< relative paths resolve against this
};

/// Parses and validates; throws ScenarioError naming the first bad field.
Scenario parse_scenario(const nlohmann::json& doc, const std::string& default_name = "scenario");
Scenario load_scenario(const std::filesystem::path& path);

struct Artifact {
  std::string file;  ///< relative to the scenario output directory
  std::uintmax_t bytes = 0;
  std::string fnv1a64;
};

struct RunOptions {
  std::filesystem::path out_dir = "out";
  int threads = 1;
};

struct RunResult {
  bool success = true;
  std::string status = "ok";
  std::filesystem::path directory;
  std::vector<Artifact> artifacts;
  nlohmann::json summary = nlohmann::json::object();
  std::optional<SolveReport> report;
  std::optional<Trajectory> solution;
  std::optional<Trajectory> replay;
};

/// Runs the experiment, writes `<out>/<name>/<kind>_<artifact>.csv` and a
/// manifest.json with checksums. A failed solve keeps its artifacts and sets
/// success = false.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options);

/// 64-bit FNV-1a of a file's bytes, as 16 lowercase hex digits.
std::string fnv1a64_file(const std::filesystem::path& path);

}  // namespace ddenoc
