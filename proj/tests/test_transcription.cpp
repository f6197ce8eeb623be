#include "ddenoc/history.hpp"
#include "ddenoc/jacobian_check.hpp"
#include "ddenoc/linear_model.hpp"
#include "ddenoc/msr_model.hpp"
#include "ddenoc/simulate.hpp"
#include "ddenoc/transcription.hpp"

#include <doctest.h>

#include <random>

using namespace ddenoc;

namespace {

std::shared_ptr<const msr::MsrModel> msr_model() {
  static const auto model = std::make_shared<const msr::MsrModel>();
  return model;
}

OcpSpec msr_ocp(int intervals, double dt, double q0, double q_sp) {
  const auto model = msr_model();
  const Vec xs = msr::steady_state(4.0, 50.0, q0, model->params()).pack();
  OcpSpec ocp = make_ocp(*model, 0.0, intervals * dt, intervals, HistoryFunction::constant(xs));
  Vec c = Vec::Zero(msr::kStates);
  c[msr::kCn] = model->params().nominal_power / model->params().nominal_neutrons;
  ocp.stage_cost = std::make_shared<TrackingCost>(c, 0, 1.0);
  Mat w = Mat::Zero(2, 2);
  w(0, 0) = 1e-2;
  w(1, 1) = 1e2;
  ocp.rate_weights = {w};
  ocp.u_ref = (Vec(2) << 50.0, 4.0).finished();
  ocp.u_min = (Vec(2) << -1000.0, 0.5).finished();
  ocp.u_max = (Vec(2) << 1000.0, 10.0).finished();
  ocp.disturbances = {Vec::Constant(1, q_sp)};
  return ocp;
}

Vec perturbed_steady(const TranscribedNlp& nlp, std::mt19937& rng) {
  std::uniform_real_distribution<double> unit(0.9, 1.1);
  const Vec xs = nlp.initial_state();
  std::vector<Vec> states;
  std::vector<Vec> inputs;
  for (int k = 0; k < nlp.intervals(); ++k) {
    for (int n = 0; n < nlp.steps_per_interval(); ++n) {
      Vec x = xs.cwiseProduct(Vec::NullaryExpr(xs.size(), [&](Eigen::Index) { return unit(rng); }));
      x[msr::kTr] = xs[msr::kTr] + 20.0 * (unit(rng) - 1.0);
      states.push_back(x);
    }
    inputs.push_back((Vec(2) << 50.0 * unit(rng), 4.0 * unit(rng)).finished());
  }
  return nlp.pack(states, inputs);
}

}  // namespace

TEST_CASE("step Jacobians match central differences") {
  const auto model = msr_model();
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> unit(0.9, 1.1);
  const Vec xs = msr::steady_state(4.0, 50.0, 2.0, model->params()).pack();
  for (int trial = 0; trial < 10; ++trial) {
    const Vec xp = xs.cwiseProduct(Vec::NullaryExpr(10, [&](Eigen::Index) { return unit(rng); }));
    const Vec xn = xs.cwiseProduct(Vec::NullaryExpr(10, [&](Eigen::Index) { return unit(rng); }));
    const Vec u = (Vec(2) << 60.0 * unit(rng), 4.0 * unit(rng)).finished();
    const double dt = 30.0;
    const StepEvaluation ev = evaluate_step(*model, xp, xn, u, Vec(0), dt);
    const auto r = [&](const Vec& a, const Vec& b, const Vec& c) { return evaluate_step(*model, a, b, c, Vec(0), dt, false).residual; };
    CHECK(relative_matrix_error(ev.d_next, central_difference_jacobian([&](const Vec& w) { return r(xp, w, u); }, xn)) <= 1e-6);
    CHECK(relative_matrix_error(ev.d_prev, central_difference_jacobian([&](const Vec& w) { return r(w, xn, u); }, xp)) <= 1e-6);
    CHECK(relative_matrix_error(ev.d_u, central_difference_jacobian([&](const Vec& w) { return r(xp, xn, w); }, u)) <= 1e-6);
  }
}

TEST_CASE("decision vector layout") {
  const TranscribedNlp nlp(msr_model(), msr_ocp(4, 30.0, 1.0, 1.0), 3);
  CHECK(nlp.num_variables() == 4 * (3 * 10 + 2));
  CHECK(nlp.num_constraints() == 4 * 3 * 10);
  CHECK(nlp.state_offset(0, 1) == 0);
  CHECK(nlp.state_offset(1, 2) == 32 + 10);
  CHECK(nlp.input_offset(2) == 2 * 32 + 30);
  CHECK(nlp.residual_offset(2, 3) == (2 * 3 + 2) * 10);
  CHECK(nlp.step_size() == doctest::Approx(10.0));
  CHECK_THROWS_AS(nlp.constraints(Vec::Zero(5)), ConfigError);
}

TEST_CASE("steady-state decision vector zeroes every residual") {
  for (double q : {1.0, 5.0, 10.0}) {
    for (int m : {1, 3}) {
      const TranscribedNlp nlp(msr_model(), msr_ocp(6, 30.0, q, q), m);
      std::vector<Vec> states(static_cast<std::size_t>(6 * m), nlp.initial_state());
      std::vector<Vec> inputs(6, (Vec(2) << 50.0, 4.0).finished());
      const Vec w = nlp.pack(states, inputs);
      const Vec c = nlp.constraints(w);
      for (Eigen::Index i = 0; i < c.size(); ++i) CHECK(std::abs(c[i]) <= 1e-10 * msr_model()->state_scales()[i % 10]);
      CHECK(nlp.objective(w) == doctest::Approx(0.0).epsilon(1e-20));
    }
  }
}

TEST_CASE("constraint Jacobian and objective gradient match central differences") {
  const TranscribedNlp nlp(msr_model(), msr_ocp(5, 30.0, 1.0, 2.5), 2);
  std::mt19937 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec w = perturbed_steady(nlp, rng);
    const Mat jac = Mat(nlp.jacobian(w));
    const Mat fd = central_difference_jacobian([&](const Vec& v) { return nlp.constraints(v); }, w);
    CHECK(relative_matrix_error(jac, fd) <= 1e-6);
    const Vec g = nlp.gradient(w);
    const Vec gfd = central_difference_gradient([&](const Vec& v) { return nlp.objective(v); }, w);
    CHECK(relative_matrix_error(Mat(g), Mat(gfd)) <= 1e-6);
  }
}

TEST_CASE("objective Hessian matches differences of the gradient") {
  const TranscribedNlp nlp(msr_model(), msr_ocp(4, 30.0, 1.0, 2.5), 1);
  std::mt19937 rng(4);
  const Vec w = perturbed_steady(nlp, rng);
  const auto h = nlp.objective_hessian(w);
  REQUIRE(h.has_value());
  const Mat fd = central_difference_jacobian([&](const Vec& v) { return nlp.gradient(v); }, w);
  CHECK(relative_matrix_error(Mat(*h), fd) <= 1e-6);
}

TEST_CASE("linearized simulation on the same grid is a feasible point") {
  const TranscribedNlp nlp(msr_model(), msr_ocp(6, 30.0, 1.0, 1.0), 3);
  std::vector<Vec> values;
  for (int k = 0; k < 6; ++k) values.push_back((Vec(2) << 50.0 + 2.0 * k, 4.0 - 0.1 * k).finished());
  SimOptions opts;
  opts.step = nlp.step_size();
  const Trajectory tr = simulate_linearized(nlp.model(), nlp.initial_state(), InputSchedule(0.0, 30.0, values),
                                            InputSchedule(), 0.0, 180.0, opts);
  const Vec w = nlp.pack(tr);
  const Vec c = nlp.constraints(w);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    CHECK(std::abs(c[i]) <= 2e-10 * std::max(1.0, std::abs(nlp.initial_state()[i % 10])));
  }
  const Trajectory back = nlp.extract_trajectory(w);
  CHECK((back.states - tr.states).cwiseAbs().maxCoeff() <= 1e-12 * 1e3);
  CHECK(back.times.back() == 180.0);
}

TEST_CASE("state restoration recovers the step solution for fixed inputs") {
  const TranscribedNlp nlp(msr_model(), msr_ocp(6, 30.0, 1.0, 1.0), 2);
  std::vector<Vec> values;
  for (int k = 0; k < 6; ++k) values.push_back((Vec(2) << 50.0 + 2.0 * k, 4.0 - 0.1 * k).finished());
  SimOptions opts;
  opts.step = nlp.step_size();
  const Trajectory tr = simulate_linearized(nlp.model(), nlp.initial_state(), InputSchedule(0.0, 30.0, values),
                                            InputSchedule(), 0.0, 180.0, opts);
  const Vec exact = nlp.pack(tr);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unit(-1e-4, 1e-4);
  Vec w = exact;
  for (int k = 0; k < 6; ++k) {
    for (int n = 1; n <= 2; ++n) {
      auto x = w.segment(nlp.state_offset(k, n), 10);
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] *= 1.0 + unit(rng);
    }
  }
  const Vec restored = nlp.restore_states(w, 1e-12, 20);
  const Vec c = nlp.constraints(restored);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    CHECK(std::abs(c[i]) <= 1e-12 * std::max(1.0, std::abs(nlp.initial_state()[i % 10])) * 2.0);
  }
  CHECK(((restored - exact).cwiseQuotient(nlp.variable_scales())).cwiseAbs().maxCoeff() <= 1e-9);
  for (int k = 0; k < 6; ++k) CHECK(nlp.input(restored, k) == nlp.input(w, k));
  CHECK_THROWS_AS(nlp.restore_states(w, 1e-12, 0), StepFailure);
}

TEST_CASE("objective on a hand-computed case") {
  const auto model = std::make_shared<const LinearDelayModel>(LinearDelayModel(
      Mat::Constant(1, 1, -1.0), Mat::Constant(1, 1, 0.0), Mat::Constant(1, 1, 1.0),
      {LinearDelayModel::Delay{Mat::Identity(1, 1), 0.5, RowVec()}}));
  OcpSpec ocp = make_ocp(*model, 0.0, 2.0, 2, HistoryFunction::constant(Vec::Zero(1)));
  ocp.stage_cost = std::make_shared<TrackingCost>(Vec::Ones(1), 0, 2.0);
  ocp.rate_weights = {Mat::Constant(1, 1, 4.0)};
  ocp.u_ref = Vec::Zero(1);
  ocp.disturbances = {Vec::Constant(1, 1.0)};
  const TranscribedNlp nlp(model, ocp, 1);
  Vec w(4);
  w << 3.0, 1.0, 2.0, 5.0;  // x_1, u_0, x_2, u_1
  // stage: 0.5*2*(3-1)^2*1 + 0.5*2*(2-1)^2*1 = 5; rates: 0.5*4*1^2/1 + 0.5*4*4^2/1 = 34
  CHECK(nlp.objective(w) == doctest::Approx(39.0));
}
