#include "ddenoc/history.hpp"
#include "ddenoc/jacobian_check.hpp"
#include "ddenoc/linear_model.hpp"
#include "ddenoc/msr_model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ddenoc;

namespace {

std::vector<SamplePoint> msr_points(const msr::MsrModel& model, int count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  std::vector<SamplePoint> pts;
  for (int k = 0; k < count; ++k) {
    const double v = 1.0 + 5.0 * unit(rng);
    const double q = 1.0 + 5.0 * unit(rng);
    const Vec xs = msr::steady_state(v, 50.0, q, model.params()).pack();
    SamplePoint p;
    p.x = xs.cwiseProduct(Vec::NullaryExpr(xs.size(), [&](Eigen::Index) { return unit(rng); }));
    p.x[msr::kTr] = xs[msr::kTr] + 10.0 * (unit(rng) - 1.0);
    p.x[msr::kThx] = xs[msr::kThx] + 10.0 * (unit(rng) - 1.0);
    p.z = stacked_delayed_maps(model, p.x).cwiseProduct(Vec::NullaryExpr(model.nz(), [&](Eigen::Index) { return unit(rng); }));
    p.u = Vec(2);
    p.u << 100.0 * (unit(rng) - 1.0), v;
    p.d = Vec(0);
    pts.push_back(p);
  }
  return pts;
}

double steady_residual(const msr::MsrModel& model, const Vec& x, const Vec& u) {
  const Vec f = model.rhs(x, stacked_delayed_maps(model, x), u, Vec(0));
  return f.cwiseQuotient(model.state_scales()).lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST_CASE("constant and sampled histories") {
  Vec c(2);
  c << 1.0, -2.0;
  const HistoryFunction h = HistoryFunction::constant(c);
  CHECK(h.is_constant());
  CHECK(h.covers(-1e9));
  CHECK(h(-5.0) == c);

  std::vector<double> t = {-2.0, -1.0, 0.0};
  std::vector<Vec> xs = {Vec::Constant(1, 0.0), Vec::Constant(1, 2.0), Vec::Constant(1, 4.0)};
  const HistoryFunction s = HistoryFunction::piecewise_linear(t, xs);
  CHECK(s.span_begin() == -2.0);
  CHECK(s.span_end() == 0.0);
  CHECK(s(-1.5)[0] == doctest::Approx(1.0));
  CHECK(s(-0.25)[0] == doctest::Approx(3.5));
  CHECK_THROWS_AS(s(-2.5), DomainError);
  CHECK_THROWS_AS(HistoryFunction::piecewise_linear({0.0, 0.0}, {Vec::Zero(1), Vec::Zero(1)}), ConfigError);
}

TEST_CASE("memory state reads the history at t - tau") {
  const LinearDelayModel model = LinearDelayModel::scalar(0.0, -1.0, 1.0);
  std::vector<double> t = {-1.0, 0.0};
  std::vector<Vec> xs = {Vec::Constant(1, 2.0), Vec::Constant(1, 4.0)};
  const HistoryFunction h = HistoryFunction::piecewise_linear(t, xs);
  const Vec z = eval_memory_state(model, h, 0.5, Vec(0));
  CHECK(z[0] == doctest::Approx(3.0));
  CHECK_THROWS_AS(eval_memory_state(model, h, -0.5, Vec(0)), HistoryUnderflow);
}

TEST_CASE("linear model derivatives") {
  Mat a(2, 2);
  a << -1.0, 0.5, 0.0, -2.0;
  Mat b(2, 1);
  b << 0.3, -0.7;
  Mat e(2, 1);
  e << 1.0, 0.0;
  LinearDelayModel::Delay d;
  d.selector = Mat(1, 2);
  d.selector << 1.0, 1.0;
  d.base = 2.0;
  d.input_gain = RowVec::Constant(1, -0.1);
  const LinearDelayModel model(a, b, e, {d});
  CHECK(model.delay(0, Vec::Constant(1, 5.0)) == doctest::Approx(1.5));
  std::vector<SamplePoint> pts;
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int k = 0; k < 10; ++k) {
    pts.push_back({Vec::NullaryExpr(2, [&](Eigen::Index) { return g(rng); }),
                   Vec::NullaryExpr(1, [&](Eigen::Index) { return g(rng); }),
                   Vec::NullaryExpr(1, [&](Eigen::Index) { return g(rng); }), Vec(0)});
  }
  const JacobianReport rep = validate_jacobians(model, pts);
  CHECK_MESSAGE(rep.pass, rep.summary());
}

TEST_CASE("MSR analytic derivatives match central differences") {
  const msr::MsrModel model;
  const JacobianReport rep = validate_jacobians(model, msr_points(model, 12, 42));
  CHECK_MESSAGE(rep.pass, rep.summary());
  CHECK(rep.blocks.size() >= 5);
}

TEST_CASE("derivative check flags a wrong Jacobian") {
  class Broken final : public LinearDelayModel {
   public:
    Broken() : LinearDelayModel(LinearDelayModel::scalar(-1.0, 0.5, 1.0)) {}
    RhsJacobians rhs_jacobians(const VecRef& x, const VecRef& z, const VecRef& u, const VecRef& d) const override {
      RhsJacobians j = LinearDelayModel::rhs_jacobians(x, z, u, d);
      j.fz(0, 0) *= 1.01;
      return j;
    }
  };
  const Broken model;
  std::vector<SamplePoint> pts = {{Vec::Constant(1, 1.0), Vec::Constant(1, 0.5), Vec(0), Vec(0)}};
  const JacobianReport rep = validate_jacobians(model, pts);
  CHECK_FALSE(rep.pass);
  const auto failing = rep.failing_blocks();
  REQUIRE(failing.size() == 1);
  CHECK(failing[0] == "df/dz");
}

TEST_CASE("MSR delays and their derivatives") {
  const msr::MsrModel model;
  Vec u(2);
  u << 50.0, 4.0;
  CHECK(model.delay(0, u) == doctest::Approx(7.5));
  CHECK(model.delay(1, u) == doctest::Approx(3.75));
  CHECK(model.delay_jacobian(0, u)[1] == doctest::Approx(-30.0 / 16.0));
  CHECK(model.delay_jacobian(0, u)[0] == 0.0);
  Vec lo(2), hi(2);
  lo << -1000.0, 0.5;
  hi << 1000.0, 10.0;
  CHECK(tau_max(model, lo, hi) == doctest::Approx(60.0));
}

TEST_CASE("MSR steady state at the nominal point") {
  const msr::MsrModel model;
  const msr::MsrState s = msr::steady_state(4.0, 50.0, 1.0, model.params());
  CHECK(s.neutrons == doctest::Approx(1.0));
  CHECK(s.core_temp == doctest::Approx(725.3583333333).epsilon(1e-12));
  CHECK(s.hx_temp == doctest::Approx(725.15).epsilon(1e-12));
  CHECK(msr::critical_reactivity(4.0, model.params()) == doctest::Approx(0.005559648326148284).epsilon(1e-12));
  const Vec x = s.pack();
  Vec u(2);
  u << 50.0, 4.0;
  CHECK(steady_residual(model, x, u) <= 1e-10);
  CHECK(msr::MsrState::unpack(x).pack() == x);
}

TEST_CASE("MSR steady states across power levels") {
  const msr::MsrModel model;
  for (double q : {1.0, 2.5, 5.0, 7.5, 10.0}) {
    for (double v : {1.0, 4.0, 8.0}) {
      const Vec x = msr::steady_state(v, 50.0, q, model.params()).pack();
      Vec u(2);
      u << 50.0, v;
      CHECK(steady_residual(model, x, u) <= 1e-10);
      CHECK(model.generated_power(x) == doctest::Approx(q));
    }
  }
}

TEST_CASE("MSR outputs and names") {
  const msr::MsrModel model;
  CHECK(model.state_names().size() == 10);
  CHECK(model.input_names() == std::vector<std::string>{"rho_ext", "v"});
  const auto outs = model.output_names();
  REQUIRE(outs.size() == 3);
  CHECK(outs[0] == "Q_g");
  const Vec x = msr::steady_state(4.0, 50.0, 2.0, model.params()).pack();
  Vec u(2);
  u << 50.0, 4.0;
  const Vec y = model.outputs(x, u);
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(y[2] == doctest::Approx(7.5));
}

TEST_CASE("MSR parameter validation") {
  msr::MsrParams p;
  p.generation_time = -1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  msr::MsrParams ok;
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.beta() == doctest::Approx(0.00645));
}
