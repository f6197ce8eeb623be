#include "ddenoc/simulate.hpp"

#include "ddenoc/transcription.hpp"


#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace ddenoc {

void SimOptions::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("sim.step must be > 0");
  if (!(newton_tol > 0.0)) throw ConfigError("sim.newton_tol must be > 0");
  if (newton_max_iter < 1) throw ConfigError("sim.newton_max_iter must be >= 1");
  if (!(retention >= 0.0)) throw ConfigError("sim.retention must be >= 0");
}

InputSchedule::InputSchedule(double t0, double interval, std::vector<Vec> values) : values_(std::move(values)) {
  if (values_.empty()) throw ConfigError("input schedule needs at least one value");
  if (values_.size() > 1 && !(interval > 0.0)) throw ConfigError("input schedule interval must be > 0");
  for (std::size_t k = 0; k < values_.size(); ++k) starts_.push_back(t0 + static_cast<double>(k) * interval);
  for (const Vec& v : values_) {
    if (v.size() != values_.front().size()) throw ConfigError("input schedule values differ in length");
  }
}

InputSchedule::InputSchedule(std::vector<double> starts, std::vector<Vec> values)
    : starts_(std::move(starts)), values_(std::move(values)) {
  if (values_.empty() || starts_.size() != values_.size()) {
    throw ConfigError("input schedule needs one start time per value");
  }
  for (std::size_t k = 1; k < starts_.size(); ++k) {
    if (!(starts_[k] > starts_[k - 1])) throw ConfigError("input schedule start times must increase strictly");
  }
  for (const Vec& v : values_) {
    if (v.size() != values_.front().size()) throw ConfigError("input schedule values differ in length");
  }
}

InputSchedule InputSchedule::constant(Vec value) {
  InputSchedule s;
  s.starts_.push_back(0.0);
  s.values_.push_back(std::move(value));
  return s;
}

int InputSchedule::index(double t) const {
  if (values_.size() <= 1) return 0;
  // Tolerate rounding of step nodes that land on a switching time.
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t, [](double v, double s) {
    return v < s - 1e-9 * (1.0 + std::abs(s));
  });
  if (it == starts_.begin()) return 0;
  return static_cast<int>(it - starts_.begin()) - 1;
}

Vec InputSchedule::operator()(double t) const {
  if (values_.empty()) return Vec();
  return values_[static_cast<std::size_t>(index(t))];
}

std::vector<double> InputSchedule::breakpoints(double a, double b) const {
  std::vector<double> out;
  for (std::size_t k = 1; k < starts_.size(); ++k) {
    if (starts_[k] > a && starts_[k] < b) out.push_back(starts_[k]);
  }
  return out;
}

namespace {

/// Step grid on [t0, tf] with every breakpoint of either schedule as a node.
std::vector<double> step_grid(double t0, double tf, double h, const InputSchedule& u, const InputSchedule& d) {
  std::vector<double> nodes{t0, tf};
  for (double t : u.breakpoints(t0, tf)) nodes.push_back(t);
  for (double t : d.breakpoints(t0, tf)) nodes.push_back(t);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end(), [](double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a)); }), nodes.end());
  std::vector<double> grid{nodes.front()};
  for (std::size_t s = 1; s < nodes.size(); ++s) {
    const double a = nodes[s - 1];
    const double b = nodes[s];
    const auto count = static_cast<long>(std::ceil((b - a) / h - 1e-9));
    for (long j = 1; j < count; ++j) grid.push_back(a + (b - a) * static_cast<double>(j) / static_cast<double>(count));
    grid.push_back(b);
  }
  return grid;
}

double scaled_norm(const Vec& r, const Vec& x) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) out = std::max(out, std::abs(r[i]) / std::max(1.0, std::abs(x[i])));
  return out;
}

/// Damped Newton for G(x) = 0 with analytic Jacobian.
template <class Residual>
Vec newton_solve(Residual&& residual, Vec x, const SimOptions& opts, double time) {
  Mat jac;
  Vec r = residual(x, &jac);
  for (int it = 0; it < opts.newton_max_iter; ++it) {
    if (!r.allFinite()) break;
    if (scaled_norm(r, x) <= opts.newton_tol) return x;
    const Vec dx = jac.partialPivLu().solve(-r);
    if (!dx.allFinite()) break;
    const double r0 = scaled_norm(r, x);
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      const Vec trial = x + lambda * dx;
      Mat trial_jac;
      Vec trial_r;
      try {
        trial_r = residual(trial, &trial_jac);
      } catch (const DomainError&) {
        lambda *= 0.5;
        continue;
      }
      if (trial_r.allFinite() && (scaled_norm(trial_r, trial) < r0 || lambda == 1.0)) {
        x = trial;
        r = std::move(trial_r);
        jac = std::move(trial_jac);
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
  }
  if (r.allFinite() && scaled_norm(r, x) <= opts.newton_tol) return x;
  std::ostringstream msg;
  msg << "implicit Euler step failed to converge at t = " << time;
  throw StepFailure(time, msg.str());
}

Trajectory make_trajectory(const DdeModel& model, std::size_t n) {
  Trajectory tr;
  tr.state_names = model.state_names();
  tr.input_names = model.input_names();
  tr.output_names = model.output_names();
  tr.times.reserve(n);
  tr.states.resize(static_cast<Eigen::Index>(n), model.nx());
  tr.inputs.resize(static_cast<Eigen::Index>(n), model.nu());
  tr.outputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(tr.output_names.size()));
  return tr;
}

void record(const DdeModel& model, Trajectory& tr, std::size_t j, double t, const Vec& x, const Vec& u) {
  tr.times.push_back(t);
  tr.states.row(static_cast<Eigen::Index>(j)) = x.transpose();
  tr.inputs.row(static_cast<Eigen::Index>(j)) = u.transpose();
  if (!tr.output_names.empty()) tr.outputs.row(static_cast<Eigen::Index>(j)) = model.outputs(x, u).transpose();
}

void check_inputs(const DdeModel& model, const InputSchedule& u, double t0, double tf) {
  if (!(tf > t0)) throw ConfigError("simulation needs tf > t0");
  if (u.empty() || u(t0).size() != model.nu()) throw ConfigError("input schedule does not match nu");
}

/// Dense record of committed steps, read by the delayed-argument lookups.
class CommittedHistory {
 public:
  void push(double t, const Vec& x) {
    times_.push_back(t);
    states_.push_back(x);
  }
  void drop_before(double t) {
    while (times_.size() > 2 && times_[1] < t) {
      times_.pop_front();
      states_.pop_front();
    }
  }
  double begin() const { return times_.front(); }
  double end() const { return times_.back(); }
  Vec at(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return states_.front();
    if (it == times_.end()) return states_.back();
    const auto j = static_cast<std::size_t>(it - times_.begin());
    const double w = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
    return (1.0 - w) * states_[j - 1] + w * states_[j];
  }

 private:
  std::deque<double> times_;
  std::deque<Vec> states_;
};

}  // namespace

Trajectory simulate_dde(const DdeModel& model, const HistoryFunction& history, const InputSchedule& inputs,
                        const InputSchedule& disturbances, double t0, double tf, const SimOptions& options) {
  options.validate();
  check_inputs(model, inputs, t0, tf);
  if (history.dim() != model.nx()) throw ConfigError("history dimension differs from nx");
  const std::vector<double> grid = step_grid(t0, tf, options.step, inputs, disturbances);

  // Step-size precondition, checked per control interval before integrating.
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double h = grid[j + 1] - grid[j];
    const Vec u = inputs(grid[j]);
    for (int i = 0; i < model.num_delays(); ++i) {
      const double tau = model.delay(i, u);
      if (!(h <= 0.5 * tau * (1.0 + 1e-12))) {
        std::ostringstream msg;
        msg << "step " << h << " s exceeds half of delay " << i + 1 << " (tau_" << i + 1 << " = " << tau
            << " s at t = " << grid[j] << "); reduce sim.step";
        throw ConfigError(msg.str());
      }
    }
  }

  Trajectory tr = make_trajectory(model, grid.size());
  CommittedHistory committed;
  Vec x = history(t0);
  committed.push(t0, x);
  const Eigen::Index nz = model.nz();
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double t = grid[j];
    const double t_next = grid[j + 1];
    const double h = t_next - t;
    const Vec u = inputs(t);
    const Vec d = disturbances(t);
    record(model, tr, j, t, x, u);

    Vec z(nz);
    for (int i = 0; i < model.num_delays(); ++i) {
      const double s = t_next - model.delay(i, u);
      if (s > t + 1e-9 * (1.0 + std::abs(t))) {
        throw Error("causality violated: delayed time beyond the committed history");
      }
      Vec past;
      if (s <= t0) {
        if (!history.covers(s)) {
          std::ostringstream msg;
          msg << "history does not cover t - tau_" << i + 1 << " = " << s;
          throw HistoryUnderflow(i, s, msg.str());
        }
        past = history(s);
      } else {
        if (s < committed.begin()) throw Error("retention span shorter than the delay");
        past = committed.at(s);
      }
      z.segment(model.z_offset(i), model.delayed_dim(i)) = model.delayed_map(i, past);
    }

    const Mat eye = Mat::Identity(model.nx(), model.nx());
    auto residual = [&](const Vec& xn, Mat* jac) {
      const Vec r = xn - x - model.rhs(xn, z, u, d) * h;
      if (jac != nullptr) *jac = eye - model.rhs_jacobians(xn, z, u, d).fx * h;
      return r;
    };
    x = newton_solve(residual, x, options, t_next);
    committed.push(t_next, x);
    if (options.retention > 0.0) committed.drop_before(t_next - options.retention);
  }
  record(model, tr, grid.size() - 1, grid.back(), x, inputs(grid[grid.size() - 2]));
  return tr;
}

Trajectory simulate_linearized(const DdeModel& model, const VecRef& x0, const InputSchedule& inputs,
                               const InputSchedule& disturbances, double t0, double tf,
                               const SimOptions& options) {
  options.validate();
  check_inputs(model, inputs, t0, tf);
  if (x0.size() != model.nx()) throw ConfigError("x0 dimension differs from nx");
  const std::vector<double> grid = step_grid(t0, tf, options.step, inputs, disturbances);
  Trajectory tr = make_trajectory(model, grid.size());
  Vec x = x0;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double t = grid[j];
    const double h = grid[j + 1] - t;
    const Vec u = inputs(t);
    const Vec d = disturbances(t);
    record(model, tr, j, t, x, u);
    auto residual = [&](const Vec& xn, Mat* jac) {
      StepEvaluation ev = evaluate_step(model, x, xn, u, d, h, jac != nullptr);
      if (jac != nullptr) *jac = std::move(ev.d_next);
      return ev.residual;
    };
    x = newton_solve(residual, x, options, grid[j + 1]);
  }
  record(model, tr, grid.size() - 1, grid.back(), x, inputs(grid[grid.size() - 2]));
  return tr;
}

}  // namespace ddenoc
