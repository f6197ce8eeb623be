#include "ddenoc/linear_model.hpp"
#include "ddenoc/msr_model.hpp"
#include "ddenoc/stability.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ddenoc;

namespace {

SteadyLinearization scalar_lin(double a, double b, double tau) {
  return make_linearization(Mat::Constant(1, 1, a), {Mat::Constant(1, 1, b)}, {tau});
}

SteadyLinearization msr_lin() {
  static const msr::MsrModel model;
  Vec u(2);
  u << 50.0, 4.0;
  const Vec x = msr::steady_state(4.0, 50.0, 1.0, model.params()).pack();
  return linearize_at_steady_state(model, x, u, Vec(0));
}

bool contains(const std::vector<Complex>& roots, Complex z, double tol) {
  for (const Complex& r : roots) {
    if (std::abs(r - z) <= tol) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("scalar delay equation: rightmost roots of lambda + exp(-lambda)") {
  const SteadyLinearization lin = scalar_lin(0.0, -1.0, 1.0);
  ScanOptions opts;
  opts.window = {-3.0, 1.0, 0.0, 10.0, 200, 200};
  const RootSet rs = find_roots_dde(lin, opts);
  const auto all = rs.with_conjugates();
  CHECK(contains(all, Complex(-0.31813150520476413, 1.3372357014306895), 1e-9));
  CHECK(contains(all, Complex(-0.31813150520476413, -1.3372357014306895), 1e-9));
  CHECK(contains(all, Complex(-2.0622777295982, 7.5886311784725), 1e-8));
  CHECK(rs.count_unstable(1e-8) == 0);
  for (const Root& r : rs.roots) CHECK(r.residual <= 1e-8);
}

TEST_CASE("scalar delay equation with an unstable real root") {
  // lambda - 0.5 + 0.2 exp(-lambda) has one positive real root.
  const SteadyLinearization lin = scalar_lin(0.5, -0.2, 1.0);
  ScanOptions opts;
  opts.window = {-5.0, 2.0, 0.0, 20.0, 128, 128};
  const RootSet rs = find_roots_dde(lin, opts);
  CHECK(rs.count_unstable(1e-8) == 1);
  for (const Root& r : rs.roots) {
    if (r.value.real() > 0.0) {
      CHECK(r.value.imag() == 0.0);
      CHECK(std::abs(char_fn_dde(lin, r.value)) < 1e-10);
    }
  }
}

TEST_CASE("approximate system of a scalar delay equation") {
  const RootSet rs = find_roots_approx(scalar_lin(0.0, -0.5, 1.0));
  REQUIRE(rs.roots.size() == 1);
  CHECK(rs.roots[0].value.real() == doctest::Approx(-1.0));
  CHECK(rs.method == RootMethod::generalized_eigen);
  CHECK_THROWS_AS(find_roots_approx(scalar_lin(0.0, -1.0, 1.0)), DegeneratePencil);
}

TEST_CASE("substitution identity on random points") {
  const SteadyLinearization lin = msr_lin();
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> re(-30.0, 5.0);
  std::uniform_real_distribution<double> im(-15.0, 15.0);
  for (int k = 0; k < 100; ++k) {
    const Complex lambda(re(rng), im(rng));
    const Complex a = char_fn_approx(lin, lambda);
    const Complex b = char_fn_with_factors(lin, lambda, linearized_delay_factors(lin, lambda)).value();
    const double scale = std::exp(kernels::char_log_row_scale(lin.char_matrices(), lambda,
                                                              linearized_delay_factors(lin, lambda)));
    CHECK(std::abs(a - b) <= 1e-10 * scale);
  }
}

TEST_CASE("characteristic function is conjugate symmetric") {
  const SteadyLinearization lin = msr_lin();
  for (Complex z : {Complex(-0.1, 0.3), Complex(-3.0, 7.0), Complex(1.0, -2.0)}) {
    const Complex a = char_fn_dde(lin, z);
    const Complex b = char_fn_dde(lin, std::conj(z));
    CHECK(std::abs(a - std::conj(b)) <= 1e-12 * std::abs(a));
  }
}

TEST_CASE("root sets are closed under conjugation") {
  const RootSet rs = find_roots_approx(msr_lin());
  const auto all = rs.with_conjugates();
  for (const Complex& z : all) CHECK(contains(all, std::conj(z), 1e-12));
  const RootSet scan = find_roots_dde(scalar_lin(0.0, -1.0, 1.0), ScanOptions{{-3.0, 1.0, 0.0, 10.0, 64, 64}});
  const auto dde_all = scan.with_conjugates();
  for (const Complex& z : dde_all) CHECK(contains(dde_all, std::conj(z), 1e-12));
}

TEST_CASE("scan is deterministic across thread counts") {
  const SteadyLinearization lin = msr_lin();
  ScanOptions a;
  a.window = {-3.0, 0.5, 0.0, 3.0, 96, 96};
  ScanOptions b = a;
  b.threads = 3;
  const RootSet ra = find_roots_dde(lin, a);
  const RootSet rb = find_roots_dde(lin, b);
  REQUIRE(ra.roots.size() == rb.roots.size());
  for (std::size_t k = 0; k < ra.roots.size(); ++k) CHECK(ra.roots[k].value == rb.roots[k].value);
}

TEST_CASE("grid field dump has the grid shape") {
  GridField field;
  ScanOptions opts;
  opts.window = {-3.0, 1.0, 0.0, 4.0, 32, 24};
  opts.field = &field;
  find_roots_dde(scalar_lin(0.0, -1.0, 1.0), opts);
  CHECK(field.re.size() == 32);
  CHECK(field.im.size() == 24);
  CHECK(field.log10_abs.rows() == 24);
  CHECK(field.log10_abs.cols() == 32);
}

TEST_CASE("linearization rejects a point that is not a steady state") {
  const msr::MsrModel model;
  Vec u(2);
  u << 50.0, 4.0;
  Vec x = msr::steady_state(4.0, 50.0, 1.0, model.params()).pack();
  x[msr::kTr] += 1.0;
  CHECK_THROWS_AS(linearize_at_steady_state(model, x, u, Vec(0)), SteadyStateError);
}

TEST_CASE("linearization of a linear model reproduces its matrices") {
  const LinearDelayModel model = LinearDelayModel::scalar(-2.0, 0.5, 1.5);
  const SteadyLinearization lin = linearize_at_steady_state(model, Vec::Zero(1), Vec(0), Vec(0));
  CHECK(lin.a0(0, 0) == doctest::Approx(-2.0));
  REQUIRE(lin.num_delays() == 1);
  CHECK(lin.b[0](0, 0) == doctest::Approx(0.5));
  CHECK(lin.tau[0] == doctest::Approx(1.5));
}
