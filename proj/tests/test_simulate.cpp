#include "ddenoc/history.hpp"
#include "ddenoc/linear_model.hpp"
#include "ddenoc/msr_model.hpp"
#include "ddenoc/simulate.hpp"

#include <doctest.h>

#include <cmath>

using namespace ddenoc;

namespace {

double value_at(const Trajectory& tr, double t) {
  for (int j = 0; j < tr.size(); ++j) {
    if (std::abs(tr.times[static_cast<std::size_t>(j)] - t) < 1e-9) return tr.states(j, 0);
  }
  FAIL("time not on the grid");
  return 0.0;
}

Trajectory scalar_run(double h, double tf = 2.0) {
  const LinearDelayModel model = LinearDelayModel::scalar(0.0, -1.0, 1.0);
  SimOptions o;
  o.step = h;
  return simulate_dde(model, HistoryFunction::constant(Vec::Ones(1)), InputSchedule::constant(Vec(0)),
                      InputSchedule(), 0.0, tf, o);
}

}  // namespace

TEST_CASE("x' = -x(t - 1) with unit history converges to the exact solution at first order") {
  const double hs[] = {0.02, 0.01, 0.005};
  double e1[3];
  double e2[3];
  for (int i = 0; i < 3; ++i) {
    const Trajectory tr = scalar_run(hs[i]);
    e1[i] = std::abs(value_at(tr, 1.0) - 0.0);
    e2[i] = std::abs(value_at(tr, 2.0) + 0.5);
  }
  CHECK(e1[2] < 1e-2);
  CHECK(e2[2] < 1e-2);
  for (int i = 0; i + 1 < 3; ++i) {
    CHECK(e2[i] / e2[i + 1] >= 1.8);
    CHECK(e2[i] / e2[i + 1] <= 2.2);
  }
}

TEST_CASE("steps longer than half a delay are rejected, naming the delay") {
  const LinearDelayModel model = LinearDelayModel::scalar(0.0, -1.0, 1.0);
  SimOptions o;
  o.step = 0.8;
  try {
    simulate_dde(model, HistoryFunction::constant(Vec::Ones(1)), InputSchedule::constant(Vec(0)), InputSchedule(),
                 0.0, 2.0, o);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tau_1") != std::string::npos);
  }
}

TEST_CASE("short history raises HistoryUnderflow") {
  const LinearDelayModel model = LinearDelayModel::scalar(0.0, -1.0, 1.0);
  const HistoryFunction h = HistoryFunction::piecewise_linear({-0.5, 0.0}, {Vec::Ones(1), Vec::Ones(1)});
  SimOptions o;
  o.step = 0.1;
  CHECK_THROWS_AS(simulate_dde(model, h, InputSchedule::constant(Vec(0)), InputSchedule(), 0.0, 1.0, o),
                  HistoryUnderflow);
}

TEST_CASE("grid lands on every input switching time") {
  const LinearDelayModel model = LinearDelayModel::scalar(-1.0, 0.0, 1.0);
  SimOptions o;
  o.step = 0.3;
  const InputSchedule u(std::vector<double>{0.0, 0.45, 1.0}, {Vec(0), Vec(0), Vec(0)});
  const Trajectory tr = simulate_dde(model, HistoryFunction::constant(Vec::Ones(1)), u, InputSchedule(), 0.0, 2.0, o);
  auto has = [&](double t) {
    for (double s : tr.times) {
      if (std::abs(s - t) < 1e-12) return true;
    }
    return false;
  };
  CHECK(has(0.45));
  CHECK(has(1.0));
  CHECK(tr.times.back() == 2.0);
  for (std::size_t j = 1; j < tr.times.size(); ++j) CHECK(tr.times[j] - tr.times[j - 1] <= 0.3 + 1e-12);
}

TEST_CASE("ODE limit matches the exact exponential at first order") {
  const LinearDelayModel model = LinearDelayModel::scalar(-1.0, 0.0, 1.0);
  double prev = 0.0;
  for (double h : {0.02, 0.01}) {
    SimOptions o;
    o.step = h;
    const Trajectory tr = simulate_dde(model, HistoryFunction::constant(Vec::Ones(1)), InputSchedule::constant(Vec(0)),
                                       InputSchedule(), 0.0, 1.0, o);
    const double err = std::abs(tr.states(tr.size() - 1, 0) - std::exp(-1.0));
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(2.0).epsilon(0.05));
    prev = err;
  }
}

TEST_CASE("input schedule lookup") {
  const InputSchedule s(0.0, 30.0, {Vec::Constant(1, 1.0), Vec::Constant(1, 2.0), Vec::Constant(1, 3.0)});
  CHECK(s(0.0)[0] == 1.0);
  CHECK(s(29.999)[0] == 1.0);
  CHECK(s(30.0)[0] == 2.0);
  CHECK(s(30.0 - 1e-12)[0] == 2.0);
  CHECK(s(1e6)[0] == 3.0);
  CHECK(s.breakpoints(10.0, 70.0) == std::vector<double>{30.0, 60.0});
  CHECK_THROWS_AS(InputSchedule(std::vector<double>{0.0, 0.0}, {Vec(0), Vec(0)}), ConfigError);
}

TEST_CASE("MSR stays at its steady state and conserves the thermal invariant") {
  const msr::MsrModel model;
  const Vec xs = msr::steady_state(4.0, 50.0, 1.0, model.params()).pack();
  SimOptions o;
  o.step = 0.05;
  const InputSchedule held = InputSchedule::constant((Vec(2) << 50.0, 4.0).finished());
  const Trajectory tr = simulate_dde(model, HistoryFunction::constant(xs), held, InputSchedule(), 0.0, 50.0, o);
  const Mat dev = tr.states.rowwise() - xs.transpose();
  CHECK(dev.cwiseAbs().maxCoeff() <= 1e-8 * xs.cwiseAbs().maxCoeff());

  const InputSchedule step(std::vector<double>{0.0, 10.0}, {(Vec(2) << 50.0, 4.0).finished(), (Vec(2) << 52.0, 3.0).finished()});
  const Trajectory moved = simulate_dde(model, HistoryFunction::constant(xs), step, InputSchedule(), 0.0, 200.0, o);
  const double kappa = model.params().thermal_coeff;
  const double i0 = moved.states(0, msr::kRhoTh) + kappa * moved.states(0, msr::kTr);
  double drift = 0.0;
  for (int j = 0; j < moved.size(); ++j) {
    drift = std::max(drift, std::abs(moved.states(j, msr::kRhoTh) + kappa * moved.states(j, msr::kTr) - i0));
  }
  CHECK(drift <= 5.0 * o.newton_tol);
  CHECK(moved.column("Q_g")[moved.size() - 1] != doctest::Approx(1.0));
}

TEST_CASE("velocity changes move the precursor delay without breaking causality") {
  const msr::MsrModel model;
  const Vec xs = msr::steady_state(4.0, 50.0, 1.0, model.params()).pack();
  SimOptions o;
  o.step = 0.1;
  const InputSchedule fast(std::vector<double>{0.0, 5.0}, {(Vec(2) << 50.0, 4.0).finished(), (Vec(2) << 50.0, 8.0).finished()});
  const Trajectory tr = simulate_dde(model, HistoryFunction::constant(xs), fast, InputSchedule(), 0.0, 30.0, o);
  CHECK(tr.column("tau_1")[tr.size() - 1] == doctest::Approx(3.75));
  CHECK(tr.states.allFinite());
}

TEST_CASE("linearized-delay simulation agrees with the delay simulation near steady state") {
  const msr::MsrModel model;
  const Vec xs = msr::steady_state(4.0, 50.0, 1.0, model.params()).pack();
  SimOptions o;
  o.step = 0.05;
  const InputSchedule held = InputSchedule::constant((Vec(2) << 50.0, 4.0).finished());
  const Trajectory lin = simulate_linearized(model, xs, held, InputSchedule(), 0.0, 10.0, o);
  const Mat dev = lin.states.rowwise() - xs.transpose();
  CHECK(dev.cwiseAbs().maxCoeff() <= 1e-8 * xs.cwiseAbs().maxCoeff());
}

TEST_CASE("simulation option validation") {
  SimOptions o;
  o.step = 0.0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
}
