#include "ddenoc/scenario.hpp"

#include "ddenoc/csv.hpp"
#include "ddenoc/ocp.hpp"
#include "ddenoc/transcription.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace ddenoc {

using nlohmann::json;

const char* kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::steady_state: return "steady-state";
    case ScenarioKind::stability: return "stability";
    case ScenarioKind::track: return "track";
    case ScenarioKind::simulate: return "simulate";
    case ScenarioKind::compare: return "compare";
  }
  return "unknown";
}

int TrackSettings::intervals() const { return static_cast<int>(std::lround((tf - t0) / dt)); }

double TrackSettings::setpoint(double t) const {
  double q = setpoints.front().q_sp;
  for (const auto& s : setpoints) {
    if (s.t_start <= t + 1e-9 * (1.0 + std::abs(t))) q = s.q_sp;
  }
  return q;
}

namespace {

/// Typed, strict access to one JSON object; every error names the field path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ScenarioError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [key, value] : j_.items()) {
      if (ok.count(key) == 0) throw ScenarioError(field(key), "unknown field");
    }
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& at(const std::string& key) const { return j_.at(key); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ScenarioError(field(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ScenarioError(field(key), "must be finite");
    return x;
  }
  double positive(const std::string& key, double fallback) const {
    const double x = number(key, fallback);
    if (!(x > 0.0)) throw ScenarioError(field(key), "must be > 0");
    return x;
  }
  int integer(const std::string& key, int fallback, int min_value) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ScenarioError(field(key), "expected an integer");
    const int x = v.get<int>();
    if (x < min_value) throw ScenarioError(field(key), "must be >= " + std::to_string(min_value));
    return x;
  }
  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ScenarioError(field(key), "expected true or false");
    return j_.at(key).get<bool>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw ScenarioError(field(key), "expected a string");
    return j_.at(key).get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback, std::size_t size) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array() || (size > 0 && v.size() != size)) {
      throw ScenarioError(field(key), "expected an array of " + std::to_string(size) + " numbers");
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ScenarioError(field(key), "expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  Vec vec2(const std::string& key, const Vec& fallback) const {
    const auto v = numbers(key, {fallback[0], fallback[1]}, 2);
    return (Vec(2) << v[0], v[1]).finished();
  }

 private:
  const json& j_;
  std::string path_;
};

template <std::size_t N>
void read_array(const Section& s, const char* key, std::array<double, N>& target) {
  const auto v = s.numbers(key, std::vector<double>(target.begin(), target.end()), N);
  for (std::size_t i = 0; i < N; ++i) target[i] = v[i];
}

msr::MsrParams parse_params(const Section& s) {
  s.allow({"decay", "beta_group", "generation_time", "heat_capacity", "hx_conductivity", "thermal_coeff",
           "salt_density", "core_mass", "hx_mass", "core_volume", "pipe_area", "pipe_length", "coolant_temp",
           "nominal_power", "nominal_neutrons"});
  msr::MsrParams p;
  read_array(s, "decay", p.decay);
  read_array(s, "beta_group", p.beta_group);
  p.generation_time = s.number("generation_time", p.generation_time);
  p.heat_capacity = s.number("heat_capacity", p.heat_capacity);
  p.hx_conductivity = s.number("hx_conductivity", p.hx_conductivity);
  p.thermal_coeff = s.number("thermal_coeff", p.thermal_coeff);
  p.salt_density = s.number("salt_density", p.salt_density);
  p.core_mass = s.number("core_mass", p.core_mass);
  p.hx_mass = s.number("hx_mass", p.hx_mass);
  p.core_volume = s.number("core_volume", p.core_volume);
  p.pipe_area = s.number("pipe_area", p.pipe_area);
  p.pipe_length = s.number("pipe_length", p.pipe_length);
  p.coolant_temp = s.number("coolant_temp", p.coolant_temp);
  p.nominal_power = s.number("nominal_power", p.nominal_power);
  p.nominal_neutrons = s.number("nominal_neutrons", p.nominal_neutrons);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ScenarioError("params", e.what());
  }
  return p;
}

SolveOptions parse_solver(const Section& s) {
  s.allow({"max_outer", "max_inner", "lbfgs_memory", "tol_stat", "tol_feas", "tol_comp", "penalty_init",
           "penalty_growth", "penalty_max", "feas_reduction", "preconditioner", "scale", "verbosity"});
  SolveOptions o;
  o.max_outer = s.integer("max_outer", o.max_outer, 1);
  o.max_inner = s.integer("max_inner", o.max_inner, 1);
  o.lbfgs_memory = s.integer("lbfgs_memory", o.lbfgs_memory, 0);
  o.tol_stat = s.positive("tol_stat", o.tol_stat);
  o.tol_feas = s.positive("tol_feas", o.tol_feas);
  o.tol_comp = s.positive("tol_comp", o.tol_comp);
  o.penalty_init = s.positive("penalty_init", o.penalty_init);
  o.penalty_growth = s.positive("penalty_growth", o.penalty_growth);
  o.penalty_max = s.positive("penalty_max", o.penalty_max);
  o.feas_reduction = s.positive("feas_reduction", o.feas_reduction);
  const std::string pc = s.text("preconditioner", "hessian_fd");
  if (pc == "none") {
    o.preconditioner = Preconditioner::none;
  } else if (pc == "gauss_newton") {
    o.preconditioner = Preconditioner::gauss_newton;
  } else if (pc == "hessian_fd") {
    o.preconditioner = Preconditioner::hessian_fd;
  } else {
    throw ScenarioError(s.field("preconditioner"), "expected none, gauss_newton or hessian_fd");
  }
  o.scale = s.boolean("scale", o.scale);
  o.verbosity = s.integer("verbosity", o.verbosity, 0);
  try {
    o.validate();
  } catch (const ConfigError& e) {
    throw ScenarioError("solver", e.what());
  }
  return o;
}

SimOptions parse_sim(const Section& s) {
  s.allow({"step", "newton_tol", "newton_max_iter", "retention"});
  SimOptions o;
  o.step = s.positive("step", o.step);
  o.newton_tol = s.positive("newton_tol", o.newton_tol);
  o.newton_max_iter = s.integer("newton_max_iter", o.newton_max_iter, 1);
  o.retention = s.number("retention", o.retention);
  if (o.retention < 0.0) throw ScenarioError(s.field("retention"), "must be >= 0");
  return o;
}

StabilitySettings parse_stability(const Section& s) {
  s.allow({"re_min", "re_max", "im_min", "im_max", "re_points", "im_points", "dump_field"});
  StabilitySettings st;
  ScanWindow& w = st.window;
  w.re_min = s.number("re_min", w.re_min);
  w.re_max = s.number("re_max", w.re_max);
  w.im_min = s.number("im_min", w.im_min);
  w.im_max = s.number("im_max", w.im_max);
  w.re_points = s.integer("re_points", w.re_points, 16);
  w.im_points = s.integer("im_points", w.im_points, 16);
  st.dump_field = s.boolean("dump_field", st.dump_field);
  if (!(w.re_max > w.re_min)) throw ScenarioError(s.field("re_max"), "must exceed re_min");
  if (!(w.im_max > w.im_min)) throw ScenarioError(s.field("im_max"), "must exceed im_min");
  if (w.im_min < 0.0) throw ScenarioError(s.field("im_min"), "must be >= 0 (conjugates are implied)");
  return st;
}

TrackSettings parse_track(const Section& s, const msr::MsrModel& model) {
  s.allow({"t0", "tf", "dt", "steps_per_interval", "rate_weights", "w_q", "u_min", "u_max", "u_ref",
           "initial_guess", "state_bounds", "setpoints"});
  TrackSettings t;
  t.t0 = s.number("t0", t.t0);
  t.tf = s.number("tf", t.tf);
  t.dt = s.positive("dt", t.dt);
  t.steps_per_interval = s.integer("steps_per_interval", t.steps_per_interval, 1);
  t.rate_weights = s.numbers("rate_weights", t.rate_weights, 2);
  t.w_q = s.number("w_q", t.w_q);
  t.u_min = s.vec2("u_min", t.u_min);
  t.u_max = s.vec2("u_max", t.u_max);
  t.u_ref = s.vec2("u_ref", t.u_ref);
  if (!(t.tf > t.t0)) throw ScenarioError(s.field("tf"), "must exceed t0");
  const double n = (t.tf - t.t0) / t.dt;
  if (std::abs(n - std::round(n)) > 1e-9 * n || std::round(n) < 1.0) {
    throw ScenarioError(s.field("dt"), "must divide tf - t0 into a whole number of intervals");
  }
  for (double w : t.rate_weights) {
    if (!(w > 0.0)) throw ScenarioError(s.field("rate_weights"), "entries must be > 0");
  }
  if (!(t.w_q >= 0.0)) throw ScenarioError(s.field("w_q"), "must be >= 0");
  for (int i = 0; i < 2; ++i) {
    if (!(t.u_min[i] <= t.u_max[i])) throw ScenarioError(s.field("u_min"), "must not exceed u_max");
    if (!(t.u_ref[i] >= t.u_min[i] && t.u_ref[i] <= t.u_max[i])) {
      throw ScenarioError(s.field("u_ref"), "must lie inside [u_min, u_max]");
    }
  }
  if (!(t.u_min[msr::kVelocity] > 0.0)) throw ScenarioError(s.field("u_min"), "velocity bound must be > 0");
  if (s.has("initial_guess")) {
    const Section g(s.at("initial_guess"), s.field("initial_guess"));
    g.allow({"rho_ext", "v"});
    t.u_guess[msr::kRhoExt] = g.number("rho_ext", t.u_guess[msr::kRhoExt]);
    t.u_guess[msr::kVelocity] = g.positive("v", t.u_guess[msr::kVelocity]);
  } else {
    t.u_guess = t.u_ref;
  }
  if (s.has("state_bounds")) {
    const Section b(s.at("state_bounds"), s.field("state_bounds"));
    const auto names = model.state_names();
    for (const auto& [key, value] : s.at("state_bounds").items()) {
      if (std::find(names.begin(), names.end(), key) == names.end()) {
        throw ScenarioError(b.field(key), "unknown state name");
      }
      const auto lohi = b.numbers(key, {}, 2);
      if (!(lohi[0] < lohi[1])) throw ScenarioError(b.field(key), "need lower < upper");
      t.state_bounds.push_back({key, {lohi[0], lohi[1]}});
    }
  }
  if (s.has("setpoints")) {
    const json& arr = s.at("setpoints");
    if (!arr.is_array() || arr.empty()) throw ScenarioError(s.field("setpoints"), "expected a non-empty array");
    t.setpoints.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Section e(arr[i], s.field("setpoints") + "[" + std::to_string(i) + "]");
      e.allow({"t_start", "q_sp"});
      if (!e.has("t_start") || !e.has("q_sp")) throw ScenarioError(e.field("t_start"), "t_start and q_sp are required");
      t.setpoints.push_back({e.number("t_start", 0.0), e.positive("q_sp", 1.0)});
    }
  }
  for (std::size_t i = 0; i < t.setpoints.size(); ++i) {
    const std::string f = s.field("setpoints") + "[" + std::to_string(i) + "].t_start";
    if (t.setpoints[i].t_start < t.t0 || t.setpoints[i].t_start > t.tf) throw ScenarioError(f, "outside [t0, tf]");
    if (i > 0 && t.setpoints[i].t_start < t.setpoints[i - 1].t_start) throw ScenarioError(f, "times must be nondecreasing");
  }
  return t;
}

SimulateSettings parse_simulate(const Section& s) {
  s.allow({"tf", "inputs", "linearized"});
  SimulateSettings st;
  st.tf = s.positive("tf", st.tf);
  st.linearized = s.boolean("linearized", st.linearized);
  if (s.has("inputs")) {
    const json& arr = s.at("inputs");
    if (!arr.is_array()) throw ScenarioError(s.field("inputs"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Section e(arr[i], s.field("inputs") + "[" + std::to_string(i) + "]");
      e.allow({"t_start", "rho_ext", "v"});
      InputStep step{e.number("t_start", 0.0), e.number("rho_ext", 50.0), e.positive("v", 4.0)};
      if (i > 0 && !(step.t_start > st.inputs.back().t_start)) {
        throw ScenarioError(e.field("t_start"), "times must increase strictly");
      }
      st.inputs.push_back(step);
    }
  }
  return st;
}

CompareSettings parse_compare(const Section& s) {
  s.allow({"a", "b", "output"});
  CompareSettings c;
  c.a = s.text("a", "");
  c.b = s.text("b", "");
  c.output = s.text("output", c.output);
  return c;
}

}  // namespace

Scenario parse_scenario(const json& doc, const std::string& default_name) {
  const Section root(doc, "");
  root.allow({"schema_version", "name", "description", "kind", "params", "operating_point", "track", "simulate",
              "compare", "stability", "solver", "sim", "output_dir"});
  Scenario sc;
  if (!root.has("schema_version")) throw ScenarioError("schema_version", "missing (required)");
  sc.schema_version = root.integer("schema_version", 0, 0);
  if (sc.schema_version != kSchemaVersion) {
    throw ScenarioError("schema_version", "unsupported version " + std::to_string(sc.schema_version) +
                                              " (expected " + std::to_string(kSchemaVersion) + ")");
  }
  sc.name = root.text("name", default_name);
  if (sc.name.empty() || sc.name.find('/') != std::string::npos) throw ScenarioError("name", "must be a plain non-empty name");
  root.text("description", "");
  if (!root.has("kind")) throw ScenarioError("kind", "missing (required)");
  const std::string kind = root.text("kind", "");
  if (kind == "steady-state") {
    sc.kind = ScenarioKind::steady_state;
  } else if (kind == "stability") {
    sc.kind = ScenarioKind::stability;
  } else if (kind == "track") {
    sc.kind = ScenarioKind::track;
  } else if (kind == "simulate") {
    sc.kind = ScenarioKind::simulate;
  } else if (kind == "compare") {
    sc.kind = ScenarioKind::compare;
  } else {
    throw ScenarioError("kind", "expected steady-state, stability, track, simulate or compare, got '" + kind + "'");
  }
  if (root.has("params")) sc.params = parse_params(Section(root.at("params"), "params"));
  const msr::MsrModel model(sc.params);
  if (root.has("operating_point")) {
    const Section s(root.at("operating_point"), "operating_point");
    s.allow({"v", "rho_ext", "q"});
    sc.op.v = s.positive("v", sc.op.v);
    sc.op.rho_ext = s.number("rho_ext", sc.op.rho_ext);
    sc.op.q = s.positive("q", sc.op.q);
  }
  if (root.has("track")) sc.track = parse_track(Section(root.at("track"), "track"), model);
  if (root.has("simulate")) sc.simulate = parse_simulate(Section(root.at("simulate"), "simulate"));
  if (root.has("compare")) sc.compare = parse_compare(Section(root.at("compare"), "compare"));
  if (root.has("stability")) sc.stability = parse_stability(Section(root.at("stability"), "stability"));
  if (root.has("solver")) sc.solver = parse_solver(Section(root.at("solver"), "solver"));
  if (root.has("sim")) sc.sim = parse_sim(Section(root.at("sim"), "sim"));
  sc.output_dir = root.text("output_dir", "");

  if (sc.kind == ScenarioKind::compare && (sc.compare.a.empty() || sc.compare.b.empty())) {
    throw ScenarioError(sc.compare.a.empty() ? "compare.a" : "compare.b", "missing (required for kind compare)");
  }
  if (sc.kind == ScenarioKind::track && !root.has("track")) {
    spdlog::debug("track section absent; using defaults");
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("<file>", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("<file>", std::string("invalid JSON: ") + e.what());
  }
  Scenario sc = parse_scenario(doc, path.stem().string());
  sc.base_dir = path.parent_path();
  return sc;
}

std::string fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

namespace {

class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, std::string kind) : dir_(std::move(dir)), kind_(std::move(kind)) {
    std::filesystem::create_directories(dir_);
  }
  std::filesystem::path path(const std::string& artifact) const { return dir_ / (kind_ + "_" + artifact + ".csv"); }
  void add(const std::filesystem::path& file) {
    Artifact a;
    a.file = file.filename().string();
    a.bytes = std::filesystem::file_size(file);
    a.fnv1a64 = fnv1a64_file(file);
    artifacts_.push_back(a);
  }
  const std::vector<Artifact>& artifacts() const { return artifacts_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string kind_;
  std::vector<Artifact> artifacts_;
};

/// Largest |rho_th(t) + kappa T_r(t) - (rho_th(0) + kappa T_r(0))| along a trajectory.
double thermal_invariant_drift(const Trajectory& tr, double kappa) {
  double drift = 0.0;
  const double ref = tr.states(0, msr::kRhoTh) + kappa * tr.states(0, msr::kTr);
  for (int j = 0; j < tr.size(); ++j) {
    drift = std::max(drift, std::abs(tr.states(j, msr::kRhoTh) + kappa * tr.states(j, msr::kTr) - ref));
  }
  return drift;
}

std::filesystem::path resolve(const Scenario& sc, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : sc.base_dir / path;
}

void run_steady_state(const Scenario& sc, ArtifactWriter& out, RunResult& res) {
  const msr::MsrModel model(sc.params);
  const Vec x = msr::steady_state(sc.op.v, sc.op.rho_ext, sc.op.q, sc.params).pack();
  const Vec u = (Vec(2) << sc.op.rho_ext, sc.op.v).finished();
  const Vec f = model.rhs(x, stacked_delayed_maps(model, x), u, Vec());
  Table table;
  for (const auto& n : model.state_names()) table.header.push_back(n);
  for (const auto& n : model.input_names()) table.header.push_back(n);
  for (const auto& n : model.output_names()) table.header.push_back(n);
  table.header.push_back("rho_crit");
  table.header.push_back("residual_inf");
  std::vector<double> row(x.data(), x.data() + x.size());
  row.insert(row.end(), u.data(), u.data() + u.size());
  const Vec y = model.outputs(x, u);
  row.insert(row.end(), y.data(), y.data() + y.size());
  row.push_back(msr::critical_reactivity(sc.op.v, sc.params));
  row.push_back(f.lpNorm<Eigen::Infinity>());
  table.rows.push_back(row);
  const auto path = out.path("state");
  write_table_csv(path.string(), table);
  out.add(path);
  for (std::size_t i = 0; i < table.header.size(); ++i) res.summary[table.header[i]] = row[i];
}

void run_stability(const Scenario& sc, const RunOptions& opts, ArtifactWriter& out, RunResult& res) {
  const msr::MsrModel model(sc.params);
  const Vec x = msr::steady_state(sc.op.v, sc.op.rho_ext, sc.op.q, sc.params).pack();
  const Vec u = (Vec(2) << sc.op.rho_ext, sc.op.v).finished();
  const SteadyLinearization lin = linearize_at_steady_state(model, x, u, Vec());

  ScanOptions scan;
  scan.window = sc.stability.window;
  scan.threads = opts.threads;
  GridField field;
  if (sc.stability.dump_field) scan.field = &field;
  const RootSet dde = find_roots_dde(lin, scan);
  const auto dde_path = out.path("roots_dde");
  write_roots_csv(dde_path.string(), dde);
  out.add(dde_path);
  res.summary["dde_roots"] = dde.roots.size();
  res.summary["dde_unstable"] = dde.count_unstable(1e-8);
  res.summary["dde_dropped_candidates"] = dde.dropped_candidates;

  try {
    const RootSet approx = find_roots_approx(lin);
    const auto approx_path = out.path("roots_approx");
    write_roots_csv(approx_path.string(), approx);
    out.add(approx_path);
    res.summary["approx_roots"] = approx.roots.size();
    res.summary["approx_unstable"] = approx.count_unstable(1e-8);
  } catch (const DegeneratePencil& e) {
    res.summary["approx_error"] = e.what();
  }
  if (sc.stability.dump_field) {
    const auto field_path = out.path("field");
    write_field_csv(field_path.string(), field);
    out.add(field_path);
  }
}

void run_track(const Scenario& sc, ArtifactWriter& out, RunResult& res) {
  const TrackSettings& ts = sc.track;
  auto model = std::make_shared<const msr::MsrModel>(sc.params);
  const msr::MsrParams& p = sc.params;
  const Vec x_hist = msr::steady_state(sc.op.v, sc.op.rho_ext, sc.op.q, p).pack();
  const int n_int = ts.intervals();

  OcpSpec ocp = make_ocp(*model, ts.t0, ts.tf, n_int, HistoryFunction::constant(x_hist));
  ocp.u_min = ts.u_min;
  ocp.u_max = ts.u_max;
  ocp.u_ref = ts.u_ref;
  ocp.rate_weights = {Vec(Eigen::Map<const Vec>(ts.rate_weights.data(), 2)).asDiagonal()};
  const auto names = model->state_names();
  for (const auto& [name, bounds] : ts.state_bounds) {
    const auto idx = std::find(names.begin(), names.end(), name) - names.begin();
    ocp.x_min[idx] = bounds.first;
    ocp.x_max[idx] = bounds.second;
  }
  Vec c = Vec::Zero(model->nx());
  c[msr::kCn] = p.nominal_power / p.nominal_neutrons;
  ocp.stage_cost = std::make_shared<TrackingCost>(c, model->nd(), ts.w_q);
  for (int k = 0; k < n_int; ++k) ocp.disturbances.push_back((Vec(1) << ts.setpoint(ocp.t0 + k * ocp.dt())).finished());

  const TranscribedNlp nlp(model, ocp, ts.steps_per_interval);
  std::vector<Vec> states;
  std::vector<Vec> inputs;
  for (int k = 0; k < n_int; ++k) {
    const Vec xs = msr::steady_state(ts.u_guess[msr::kVelocity], ts.u_guess[msr::kRhoExt],
                                     ocp.disturbances[static_cast<std::size_t>(k)][0], p).pack();
    for (int n = 0; n < ts.steps_per_interval; ++n) states.push_back(xs);
    inputs.push_back(ts.u_guess);
  }
  const SolveReport report = solve(nlp, nlp.pack(states, inputs), sc.solver);
  // Residuals left by the solver accumulate along the horizon; the reported
  // trajectory satisfies the step equations to the simulator's tolerance.
  const Vec w_sol = nlp.restore_states(report.w, sc.sim.newton_tol, sc.sim.newton_max_iter);
  const Trajectory solution = nlp.extract_trajectory(w_sol);

  Table iters;
  iters.header = {"iter", "objective", "feas", "stat", "penalty"};
  for (const auto& r : report.history) {
    iters.rows.push_back({static_cast<double>(r.iter), r.objective, r.feasibility, r.stationarity, r.penalty});
  }
  const auto iter_path = out.path("iterations");
  write_table_csv(iter_path.string(), iters);
  out.add(iter_path);
  const auto sol_path = out.path("solution");
  write_trajectory_csv(sol_path.string(), solution);
  out.add(sol_path);

  const bool converged = report.status == SolveStatus::converged;
  res.summary["status"] = status_name(report.status);
  res.summary["objective"] = report.objective;
  res.summary["feasibility"] = report.kkt.feasibility;
  res.summary["stationarity_scaled"] = report.kkt_scaled.stationarity;
  res.summary["tol_stat_effective"] = report.tol_stat_effective;
  res.summary["outer_iterations"] = report.outer_iterations;
  res.summary["inner_iterations"] = report.inner_iterations;
  res.summary["solution_invariant_drift"] = thermal_invariant_drift(solution, p.thermal_coeff);
  const KktResidual restored = kkt_residual(nlp, w_sol, report.mu, report.nu_lower, report.nu_upper);
  res.summary["restored_feasibility"] = restored.feasibility;
  res.summary["restored_stationarity"] = restored.stationarity;
  res.summary["restored_max_state_change"] = (w_sol - report.w).cwiseQuotient(nlp.variable_scales()).cwiseAbs().maxCoeff();

  // Replay the optimal inputs through the original delay equations.
  std::vector<Vec> u_opt;
  for (int k = 0; k < n_int; ++k) u_opt.push_back(nlp.input(report.w, k));
  const InputSchedule schedule(ocp.t0, ocp.dt(), u_opt);
  const Trajectory replay = simulate_dde(*model, ocp.history, schedule, InputSchedule(), ocp.t0, ocp.tf, sc.sim);
  const auto replay_path = out.path("replay");
  write_trajectory_csv(replay_path.string(), replay);
  out.add(replay_path);

  const ErrorSeries err = compare_trajectories(replay, solution, "Q_g");
  Table cmp;
  cmp.header = {"t", "Q_g_difference"};
  for (std::size_t j = 0; j < err.times.size(); ++j) cmp.rows.push_back({err.times[j], err.difference[static_cast<Eigen::Index>(j)]});
  const auto cmp_path = out.path("comparison");
  write_table_csv(cmp_path.string(), cmp);
  out.add(cmp_path);

  const double q_final = replay.column("Q_g")[replay.size() - 1];
  const double q_sp = ts.setpoint(ocp.tf);
  res.summary["replay_final_Q_g"] = q_final;
  res.summary["setpoint_final"] = q_sp;
  res.summary["replay_final_rel_error"] = std::abs(q_final - q_sp) / q_sp;
  res.summary["replay_max_abs_Q_g"] = replay.column("Q_g").cwiseAbs().maxCoeff();
  res.summary["replay_invariant_drift"] = thermal_invariant_drift(replay, p.thermal_coeff);
  res.summary["comparison_inf_norm"] = err.inf_norm;
  res.summary["comparison_two_norm"] = err.two_norm;

  if (!converged) {
    res.success = false;
    res.status = "solver_not_converged";
  }
  res.report = report;
  res.solution = solution;
  res.replay = replay;
}

void run_simulate(const Scenario& sc, ArtifactWriter& out, RunResult& res) {
  const msr::MsrModel model(sc.params);
  const Vec x0 = msr::steady_state(sc.op.v, sc.op.rho_ext, sc.op.q, sc.params).pack();
  std::vector<double> starts;
  std::vector<Vec> values;
  if (sc.simulate.inputs.empty()) {
    starts.push_back(0.0);
    values.push_back((Vec(2) << sc.op.rho_ext, sc.op.v).finished());
  }
  for (const auto& s : sc.simulate.inputs) {
    starts.push_back(s.t_start);
    values.push_back((Vec(2) << s.rho_ext, s.v).finished());
  }
  const InputSchedule schedule(starts, values);
  const Trajectory tr = simulate_dde(model, HistoryFunction::constant(x0), schedule, InputSchedule(), 0.0,
                                     sc.simulate.tf, sc.sim);
  const auto path = out.path("trajectory");
  write_trajectory_csv(path.string(), tr);
  out.add(path);
  res.summary["final_Q_g"] = tr.column("Q_g")[tr.size() - 1];
  res.summary["invariant_drift"] = thermal_invariant_drift(tr, sc.params.thermal_coeff);
  if (sc.simulate.linearized) {
    // The linearized-delay system can be unstable where the delay equations
    // are not; a blow-up is reported, not treated as a failed run.
    try {
      const Trajectory lin = simulate_linearized(model, x0, schedule, InputSchedule(), 0.0, sc.simulate.tf, sc.sim);
      const auto lpath = out.path("linearized");
      write_trajectory_csv(lpath.string(), lin);
      out.add(lpath);
      res.summary["linearized_final_Q_g"] = lin.column("Q_g")[lin.size() - 1];
    } catch (const StepFailure& e) {
      res.summary["linearized_failed_at"] = e.time();
    }
  }
  res.replay = tr;
}

void run_compare(const Scenario& sc, ArtifactWriter& out, RunResult& res) {
  const Trajectory a = read_trajectory_csv(resolve(sc, sc.compare.a).string());
  const Trajectory b = read_trajectory_csv(resolve(sc, sc.compare.b).string());
  const ErrorSeries err = compare_trajectories(a, b, sc.compare.output);
  Table table;
  table.header = {"t", sc.compare.output + "_difference"};
  for (std::size_t j = 0; j < err.times.size(); ++j) table.rows.push_back({err.times[j], err.difference[static_cast<Eigen::Index>(j)]});
  const auto path = out.path("error");
  write_table_csv(path.string(), table);
  out.add(path);
  res.summary["inf_norm"] = err.inf_norm;
  res.summary["two_norm"] = err.two_norm;
  res.summary["points"] = err.times.size();
}

}  // namespace

RunResult run_scenario(const Scenario& sc, const RunOptions& options) {
  RunResult res;
  ArtifactWriter out(options.out_dir / sc.name, kind_name(sc.kind));
  res.directory = out.dir();
  switch (sc.kind) {
    case ScenarioKind::steady_state: run_steady_state(sc, out, res); break;
    case ScenarioKind::stability: run_stability(sc, options, out, res); break;
    case ScenarioKind::track: run_track(sc, out, res); break;
    case ScenarioKind::simulate: run_simulate(sc, out, res); break;
    case ScenarioKind::compare: run_compare(sc, out, res); break;
  }
  res.artifacts = out.artifacts();

  json manifest;
  manifest["scenario"] = sc.name;
  manifest["kind"] = kind_name(sc.kind);
  manifest["schema_version"] = sc.schema_version;
  manifest["status"] = res.status;
  manifest["success"] = res.success;
  manifest["checksum"] = "fnv1a64";
  manifest["artifacts"] = json::array();
  for (const auto& a : res.artifacts) {
    manifest["artifacts"].push_back({{"file", a.file}, {"bytes", a.bytes}, {"fnv1a64", a.fnv1a64}});
  }
  manifest["summary"] = res.summary;
  std::ofstream mf(out.dir() / "manifest.json", std::ios::binary | std::ios::trunc);
  mf << manifest.dump(2) << '\n';
  if (!mf) throw Error("cannot write manifest.json in " + out.dir().string());
  return res;
}

}  // namespace ddenoc
