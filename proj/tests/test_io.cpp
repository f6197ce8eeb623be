#include "ddenoc/csv.hpp"
#include "ddenoc/scenario.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace ddenoc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ddenoc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string field_of(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ScenarioError& e) {
    return e.field();
  }
  return "<accepted>";
}

json minimal(const std::string& kind) { return {{"schema_version", 1}, {"kind", kind}}; }

}  // namespace

TEST_CASE("doubles survive a text round trip bit for bit") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 725.3583333333333, 5e-324}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("trajectory CSV round trip") {
  Trajectory tr;
  tr.times = {0.0, 0.1, 0.30000000000000004};
  tr.state_names = {"x1", "x2"};
  tr.input_names = {"u"};
  tr.output_names = {"y"};
  tr.states.resize(3, 2);
  tr.states << 1.0, 2.0, 1.0 / 3.0, -4.0, 5e-17, 6.0;
  tr.inputs.resize(3, 1);
  tr.inputs << 0.5, 0.5, 0.25;
  tr.outputs.resize(3, 1);
  tr.outputs << 9.0, 8.0, 7.0;
  const fs::path dir = temp_dir("traj");
  const std::string file = (dir / "t.csv").string();
  write_trajectory_csv(file, tr);
  const Trajectory back = read_trajectory_csv(file);
  CHECK(back.times == tr.times);
  CHECK(back.column("x1") == tr.column("x1"));
  CHECK(back.column("x2") == tr.column("x2"));
  CHECK(back.column("u") == tr.column("u"));
  CHECK(back.column("y") == tr.column("y"));
  CHECK_THROWS_AS(back.column("nope"), ConfigError);
}

TEST_CASE("table CSV round trip and malformed input") {
  Table t;
  t.header = {"iter", "value"};
  t.rows = {{0.0, 1.5}, {1.0, std::numeric_limits<double>::infinity()}};
  const fs::path dir = temp_dir("table");
  write_table_csv((dir / "a.csv").string(), t);
  const Table back = read_table_csv((dir / "a.csv").string());
  CHECK(back.header == t.header);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0] == t.rows[0]);
  CHECK(std::isinf(back.rows[1][1]));

  std::ofstream(dir / "bad.csv") << "a,b\n1,2\n3\n";
  CHECK_THROWS(read_table_csv((dir / "bad.csv").string()));
  CHECK_THROWS(read_table_csv((dir / "missing.csv").string()));
}

TEST_CASE("trajectory comparison resamples onto the coarser grid") {
  Trajectory a;
  a.times = {0.0, 1.0, 2.0};
  a.state_names = {"x"};
  a.states = Mat(3, 1);
  a.states << 0.0, 1.0, 2.0;
  a.inputs = Mat(3, 0);
  a.outputs = Mat(3, 0);
  Trajectory b = a;
  b.times = {0.0, 0.5, 1.0, 1.5, 2.0};
  b.states = Mat(5, 1);
  b.states << 0.0, 0.5, 1.0, 1.5, 1.0;
  b.inputs = Mat(5, 0);
  b.outputs = Mat(5, 0);
  const ErrorSeries e = compare_trajectories(a, b, "x");
  REQUIRE(e.times.size() == 3);
  CHECK(e.difference[2] == doctest::Approx(1.0));
  CHECK(e.inf_norm == doctest::Approx(1.0));
}

TEST_CASE("scenario validation names the offending field") {
  CHECK(field_of({{"schema_version", 1}}) == "kind");
  CHECK(field_of({{"kind", "track"}}) == "schema_version");
  CHECK(field_of({{"schema_version", 2}, {"kind", "track"}}) == "schema_version");
  CHECK(field_of(minimal("bogus")) == "kind");

  json extra = minimal("steady-state");
  extra["colour"] = "blue";
  CHECK(field_of(extra) == "colour");

  json dt = minimal("track");
  dt["track"] = {{"dt", 7.0}};
  CHECK(field_of(dt) == "track.dt");

  json pc = minimal("track");
  pc["solver"] = {{"preconditioner", "magic"}};
  CHECK(field_of(pc) == "solver.preconditioner");

  json sp = minimal("track");
  sp["track"] = {{"setpoints", json::array({{{"t_start", 0.0}, {"q_sp", 1.0}}, {{"t_start", 9000.0}, {"q_sp", 2.0}}})}};
  CHECK(field_of(sp) == "track.setpoints[1].t_start");

  json neg = minimal("steady-state");
  neg["operating_point"] = {{"v", -1.0}};
  CHECK(field_of(neg) == "operating_point.v");

  json cmp = minimal("compare");
  CHECK(field_of(cmp) == "compare.a");

  json params = minimal("steady-state");
  params["params"] = {{"generation_time", -1.0}};
  CHECK(field_of(params).rfind("params", 0) == 0);

  json type = minimal("stability");
  type["stability"] = {{"re_points", "many"}};
  CHECK(field_of(type) == "stability.re_points");
}

TEST_CASE("bundled scenarios parse") {
  const fs::path dir = fs::path(DDENOC_SOURCE_DIR) / "scenarios";
  int count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_scenario(entry.path()));
    ++count;
  }
  CHECK(count >= 8);
  const Scenario t = load_scenario(dir / "track_2p5MW.json");
  CHECK(t.kind == ScenarioKind::track);
  CHECK(t.track.intervals() == 100);
  CHECK(t.track.setpoint(299.0) == 1.0);
  CHECK(t.track.setpoint(300.0) == 2.5);
}

TEST_CASE("steady-state run writes a manifest with checksums") {
  const fs::path out = temp_dir("run");
  json doc = minimal("steady-state");
  doc["name"] = "ss";
  const RunResult res = run_scenario(parse_scenario(doc), RunOptions{out, 1});
  CHECK(res.success);
  REQUIRE(res.artifacts.size() == 1);
  const fs::path csv = out / "ss" / res.artifacts[0].file;
  CHECK(fs::exists(csv));
  CHECK(res.artifacts[0].fnv1a64 == fnv1a64_file(csv));
  std::ifstream in(out / "ss" / "manifest.json");
  const json manifest = json::parse(in);
  CHECK(manifest["kind"] == "steady-state");
  CHECK(manifest["checksum"] == "fnv1a64");
  CHECK(manifest["artifacts"][0]["fnv1a64"] == res.artifacts[0].fnv1a64);
  CHECK(res.summary["residual_inf"].get<double>() <= 1e-10);
}

TEST_CASE("FNV-1a reference values") {
  const fs::path dir = temp_dir("fnv");
  std::ofstream(dir / "empty").close();
  std::ofstream(dir / "a") << "a";
  CHECK(fnv1a64_file(dir / "empty") == "cbf29ce484222325");
  CHECK(fnv1a64_file(dir / "a") == "af63dc4c8601ec8c");
}
