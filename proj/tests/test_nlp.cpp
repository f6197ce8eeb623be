#include "ddenoc/nlp.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace ddenoc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// min 0.5|x - a|^2 s.t. x0 + x1 = 1, x0 >= lo0.
class Qp final : public NlpProblem {
 public:
  explicit Qp(double lo0) : lo0_(lo0) {}
  int num_variables() const override { return 2; }
  int num_constraints() const override { return 1; }
  double objective(const Vec& w) const override { return 0.5 * (w - a()).squaredNorm(); }
  Vec gradient(const Vec& w) const override { return w - a(); }
  Vec constraints(const Vec& w) const override { return Vec::Constant(1, w[0] + w[1] - 1.0); }
  SpMat jacobian(const Vec&) const override {
    SpMat j(1, 2);
    j.insert(0, 0) = 1.0;
    j.insert(0, 1) = 1.0;
    return j;
  }
  Vec lower_bounds() const override { return (Vec(2) << lo0_, -kInf).finished(); }
  std::optional<SpMat> objective_hessian(const Vec&) const override {
    SpMat h(2, 2);
    h.setIdentity();
    return h;
  }

 private:
  static Vec a() { return (Vec(2) << 1.0, 2.0).finished(); }
  double lo0_;
};

/// Rosenbrock with box bounds and no equality constraints.
class Rosenbrock final : public NlpProblem {
 public:
  Rosenbrock(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {}
  int num_variables() const override { return 2; }
  int num_constraints() const override { return 0; }
  double objective(const Vec& w) const override {
    return std::pow(1.0 - w[0], 2) + 100.0 * std::pow(w[1] - w[0] * w[0], 2);
  }
  Vec gradient(const Vec& w) const override {
    Vec g(2);
    g[0] = -2.0 * (1.0 - w[0]) - 400.0 * w[0] * (w[1] - w[0] * w[0]);
    g[1] = 200.0 * (w[1] - w[0] * w[0]);
    return g;
  }
  Vec constraints(const Vec&) const override { return Vec(0); }
  SpMat jacobian(const Vec&) const override { return SpMat(0, 2); }
  Vec lower_bounds() const override { return lo_; }
  Vec upper_bounds() const override { return hi_; }

 private:
  Vec lo_, hi_;
};

/// min x0^2 + x1^2 + x2^2 s.t. x0 x1 = 1, x2 - x0 = 0.5 (nonlinear equality).
class Hyperbola final : public NlpProblem {
 public:
  int num_variables() const override { return 3; }
  int num_constraints() const override { return 2; }
  double objective(const Vec& w) const override { return w.squaredNorm(); }
  Vec gradient(const Vec& w) const override { return 2.0 * w; }
  Vec constraints(const Vec& w) const override {
    return (Vec(2) << w[0] * w[1] - 1.0, w[2] - w[0] - 0.5).finished();
  }
  SpMat jacobian(const Vec& w) const override {
    SpMat j(2, 3);
    j.insert(0, 0) = w[1];
    j.insert(0, 1) = w[0];
    j.insert(1, 0) = -1.0;
    j.insert(1, 2) = 1.0;
    return j;
  }
};

}  // namespace

TEST_CASE("equality-constrained QP") {
  for (Preconditioner pc : {Preconditioner::none, Preconditioner::gauss_newton, Preconditioner::hessian_fd}) {
    SolveOptions o;
    o.preconditioner = pc;
    const SolveReport r = solve(Qp(-kInf), Vec::Zero(2), o);
    REQUIRE(r.status == SolveStatus::converged);
    CHECK(r.w[0] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(std::abs(r.w[0]) <= 1e-6);
    CHECK(std::abs(r.w[1] - 1.0) <= 1e-6);
    CHECK(std::abs(r.mu[0] - 1.0) <= 1e-5);
  }
}

TEST_CASE("QP with an active bound reports its multiplier") {
  const SolveReport r = solve(Qp(0.25), Vec::Constant(2, 0.5));
  REQUIRE(r.status == SolveStatus::converged);
  CHECK(std::abs(r.w[0] - 0.25) <= 1e-6);
  CHECK(std::abs(r.w[1] - 0.75) <= 1e-6);
  CHECK(std::abs(r.mu[0] - 1.25) <= 1e-5);
  CHECK(std::abs(r.nu_lower[0] - 0.5) <= 1e-5);
  CHECK(r.nu_upper.cwiseAbs().maxCoeff() == 0.0);
  const KktResidual k = kkt_residual(Qp(0.25), r.w, r.mu, r.nu_lower, r.nu_upper);
  CHECK(k.stationarity == doctest::Approx(r.kkt.stationarity));
  CHECK(k.feasibility <= 1e-6);
}

TEST_CASE("bounded Rosenbrock") {
  SolveOptions o;
  o.preconditioner = Preconditioner::none;
  o.max_inner = 5000;
  o.tol_stat = 1e-9;
  SUBCASE("unconstrained optimum") {
    const Vec lo = Vec::Constant(2, -kInf);
    const Vec hi = Vec::Constant(2, kInf);
    const SolveReport r = solve(Rosenbrock(lo, hi), (Vec(2) << -1.2, 1.0).finished(), o);
    REQUIRE(r.status == SolveStatus::converged);
    CHECK(std::abs(r.w[0] - 1.0) <= 1e-6);
    CHECK(std::abs(r.w[1] - 1.0) <= 1e-6);
  }
  SUBCASE("upper bound active") {
    const Vec lo = (Vec(2) << -1.5, -1.5).finished();
    const Vec hi = (Vec(2) << 0.5, 1.5).finished();
    const SolveReport r = solve(Rosenbrock(lo, hi), (Vec(2) << -1.2, 1.0).finished(), o);
    REQUIRE(r.status == SolveStatus::converged);
    CHECK(std::abs(r.w[0] - 0.5) <= 1e-6);
    CHECK(std::abs(r.w[1] - 0.25) <= 1e-6);
    CHECK(std::abs(r.objective - 0.25) <= 1e-6);
    CHECK(r.nu_upper[0] == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("nonlinear equality constraints") {
  const SolveReport r = solve(Hyperbola(), (Vec(3) << 2.0, 2.0, 0.0).finished());
  REQUIRE(r.status == SolveStatus::converged);
  CHECK(std::abs(r.w[0] * r.w[1] - 1.0) <= 1e-6);
  CHECK(std::abs(r.w[2] - r.w[0] - 0.5) <= 1e-6);
  CHECK(r.kkt.stationarity <= 1e-4);
}

TEST_CASE("merit function decreases inside every outer iteration") {
  const SolveReport r = solve(Hyperbola(), (Vec(3) << 2.0, 2.0, 0.0).finished());
  REQUIRE_FALSE(r.merit_trace.empty());
  for (const auto& trace : r.merit_trace) {
    for (std::size_t j = 1; j < trace.size(); ++j) CHECK(trace[j] <= trace[j - 1]);
  }
  CHECK(r.history.size() == static_cast<std::size_t>(r.outer_iterations));
}

TEST_CASE("repeated solves are bitwise identical") {
  const SolveReport a = solve(Hyperbola(), (Vec(3) << 2.0, 2.0, 0.0).finished());
  const SolveReport b = solve(Hyperbola(), (Vec(3) << 2.0, 2.0, 0.0).finished());
  CHECK(a.w == b.w);
  CHECK(a.mu == b.mu);
  CHECK(a.inner_iterations == b.inner_iterations);
}

TEST_CASE("iteration limit is reported") {
  SolveOptions o;
  o.max_outer = 1;
  o.max_inner = 2;
  o.preconditioner = Preconditioner::none;
  const SolveReport r = solve(Hyperbola(), (Vec(3) << 2.0, 2.0, 0.0).finished(), o);
  CHECK(r.status != SolveStatus::converged);
  CHECK(std::string(status_name(r.status)).size() > 0);
}

TEST_CASE("option validation") {
  SolveOptions o;
  o.tol_feas = -1.0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  SolveOptions m;
  m.lbfgs_memory = -1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  CHECK_THROWS_AS(solve(Qp(-kInf), Vec::Zero(3)), ConfigError);
}

TEST_CASE("scaled problem maps between raw and scaled variables") {
  class Scaled final : public NlpProblem {
   public:
    int num_variables() const override { return 2; }
    int num_constraints() const override { return 1; }
    double objective(const Vec& w) const override { return 0.5 * (w[0] * w[0] + 1e-6 * w[1] * w[1]); }
    Vec gradient(const Vec& w) const override { return (Vec(2) << w[0], 1e-6 * w[1]).finished(); }
    Vec constraints(const Vec& w) const override { return Vec::Constant(1, w[0] + 1e-3 * w[1] - 1.0); }
    SpMat jacobian(const Vec&) const override {
      SpMat j(1, 2);
      j.insert(0, 0) = 1.0;
      j.insert(0, 1) = 1e-3;
      return j;
    }
    Vec variable_scales() const override { return (Vec(2) << 1.0, 1e3).finished(); }
  };
  const Scaled raw;
  const ScaledProblem sp(raw);
  const Vec w = (Vec(2) << 0.3, 400.0).finished();
  CHECK(sp.to_raw(sp.to_scaled(w)).isApprox(w));
  CHECK(sp.objective(sp.to_scaled(w)) == doctest::Approx(raw.objective(w)));
  const SolveReport r = solve(raw, Vec::Zero(2));
  REQUIRE(r.status == SolveStatus::converged);
  // Optimum of 0.5(a^2 + 1e-6 b^2) on a + 1e-3 b = 1: a = b * 1e-3, a = 0.5.
  CHECK(std::abs(r.w[0] - 0.5) <= 1e-6);
  CHECK(std::abs(r.w[1] - 500.0) <= 1e-3);
}
