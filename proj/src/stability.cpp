#include "ddenoc/stability.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace ddenoc {

kernels::CharMatrices SteadyLinearization::char_matrices() const {
  kernels::CharMatrices mats;
  mats.n = n();
  mats.m = num_delays();
  const auto nn = static_cast<std::size_t>(mats.n) * static_cast<std::size_t>(mats.n);
  mats.a0.resize(nn);
  mats.b.resize(nn * static_cast<std::size_t>(mats.m));
  for (int r = 0; r < mats.n; ++r) {
    for (int c = 0; c < mats.n; ++c) {
      const auto k = static_cast<std::size_t>(r * mats.n + c);
      mats.a0[k] = a0(r, c);
      for (int i = 0; i < mats.m; ++i) mats.b[static_cast<std::size_t>(i) * nn + k] = b[static_cast<std::size_t>(i)](r, c);
    }
  }
  return mats;
}

SteadyLinearization make_linearization(Mat a0, std::vector<Mat> b, std::vector<double> tau) {
  if (a0.rows() != a0.cols()) throw ConfigError("A0 must be square");
  if (b.size() != tau.size()) throw ConfigError("one delay per B matrix required");
  for (const auto& bi : b) {
    if (bi.rows() != a0.rows() || bi.cols() != a0.cols()) throw ConfigError("B_i must match A0");
  }
  SteadyLinearization lin;
  lin.a0 = std::move(a0);
  lin.b = std::move(b);
  lin.tau = std::move(tau);
  return lin;
}

SteadyLinearization linearize_at_steady_state(const DdeModel& model, const VecRef& x_s,
                                              const VecRef& u_s, const VecRef& d_s, double tol) {
  const Vec z_s = stacked_delayed_maps(model, x_s);
  const double residual = model.rhs(x_s, z_s, u_s, d_s).lpNorm<Eigen::Infinity>();
  if (!(residual <= tol)) {
    std::ostringstream msg;
    msg << "not a steady state: ||f(x_s, z_s, u_s)||_inf = " << residual << " > " << tol;
    throw SteadyStateError(residual, msg.str());
  }
  const RhsJacobians jac = model.rhs_jacobians(x_s, z_s, u_s, d_s);
  SteadyLinearization lin;
  lin.a0 = jac.fx;
  for (int i = 0; i < model.num_delays(); ++i) {
    lin.b.push_back(jac.fz.middleCols(model.z_offset(i), model.delayed_dim(i)) *
                    model.delayed_map_jacobian(i, x_s));
    lin.tau.push_back(model.delay(i, u_s));
  }
  lin.x_s = x_s;
  lin.u_s = u_s;
  lin.d_s = d_s;
  return lin;
}

const char* method_name(RootMethod method) {
  return method == RootMethod::transcendental ? "transcendental" : "generalized-eigen";
}

std::vector<Complex> RootSet::with_conjugates() const {
  std::vector<Complex> out;
  for (const auto& r : roots) out.push_back(r.value);
  for (const auto& r : roots) {
    if (r.value.imag() == 0.0) continue;
    const Complex c = std::conj(r.value);
    const bool present = std::any_of(out.begin(), out.end(), [&](Complex v) { return std::abs(v - c) <= 1e-9 * (1.0 + std::abs(c)); });
    if (!present) out.push_back(c);
  }
  return out;
}

int RootSet::count_unstable(double tol) const {
  return static_cast<int>(std::count_if(roots.begin(), roots.end(), [&](const Root& r) { return r.value.real() > tol; }));
}

std::vector<Complex> delay_factors(const SteadyLinearization& lin, Complex lambda) {
  std::vector<Complex> f;
  f.reserve(lin.tau.size());
  for (double tau : lin.tau) f.push_back(std::exp(-tau * lambda));
  return f;
}

std::vector<Complex> linearized_delay_factors(const SteadyLinearization& lin, Complex lambda) {
  std::vector<Complex> f;
  f.reserve(lin.tau.size());
  for (double tau : lin.tau) f.push_back(1.0 - tau * lambda);
  return f;
}

kernels::ScaledDet char_fn_with_factors(const SteadyLinearization& lin, Complex lambda,
                                        const std::vector<Complex>& factors) {
  return kernels::char_det(lin.char_matrices(), lambda, factors);
}

kernels::ScaledDet char_fn_dde_scaled(const SteadyLinearization& lin, Complex lambda) {
  return char_fn_with_factors(lin, lambda, delay_factors(lin, lambda));
}

Complex char_fn_dde(const SteadyLinearization& lin, Complex lambda) {
  return char_fn_dde_scaled(lin, lambda).value();
}

Complex char_fn_approx(const SteadyLinearization& lin, Complex lambda) {
  Mat k = lin.a0;
  Mat m = Mat::Identity(lin.n(), lin.n());
  for (int i = 0; i < lin.num_delays(); ++i) {
    k += lin.b[static_cast<std::size_t>(i)];
    m += lin.tau[static_cast<std::size_t>(i)] * lin.b[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXcd pencil = lambda * m.cast<Complex>() - k.cast<Complex>();
  return pencil.partialPivLu().determinant();
}

namespace {

double relative_residual(const kernels::CharMatrices& mats, Complex lambda, const std::vector<Complex>& factors) {
  const kernels::ScaledDet det = kernels::char_det(mats, lambda, factors);
  if (det.is_zero()) return 0.0;
  return std::exp(det.log_abs() - kernels::char_log_row_scale(mats, lambda, factors));
}

// Evaluation context for the transcendental function.
struct DdeEvaluator {
  kernels::CharMatrices mats;
  std::vector<double> tau;

  std::vector<Complex> factors(Complex lambda) const {
    std::vector<Complex> f;
    f.reserve(tau.size());
    for (double t : tau) f.push_back(std::exp(-t * lambda));
    return f;
  }
  kernels::ScaledDet operator()(Complex lambda) const { return kernels::char_det(mats, lambda, factors(lambda)); }
  double residual(Complex lambda) const { return relative_residual(mats, lambda, factors(lambda)); }
};

struct NewtonResult {
  bool converged = false;
  Complex root;
};

// Damped Newton on det T(lambda); the derivative is a central difference
// evaluated relative to the current scaled determinant.
NewtonResult newton_refine(const DdeEvaluator& eval, Complex start, int max_iter) {
  Complex lambda = start;
  kernels::ScaledDet d0 = eval(lambda);
  for (int it = 0; it < max_iter; ++it) {
    if (d0.is_zero()) return {true, lambda};
    const double h = 1e-7 * (1.0 + std::abs(lambda));
    const kernels::ScaledDet dp = eval(lambda + h);
    const kernels::ScaledDet dm = eval(lambda - h);
    auto rescale = [&](const kernels::ScaledDet& d) {
      if (d.is_zero()) return Complex(0.0, 0.0);
      const long shift = d.exponent - d0.exponent;
      if (shift > 1000) return Complex(std::numeric_limits<double>::infinity(), 0.0);
      if (shift < -1000) return Complex(0.0, 0.0);
      return Complex(std::ldexp(d.mantissa.real(), static_cast<int>(shift)),
                     std::ldexp(d.mantissa.imag(), static_cast<int>(shift)));
    };
    const Complex derivative = (rescale(dp) - rescale(dm)) / (2.0 * h);
    if (!(std::isfinite(derivative.real()) && std::isfinite(derivative.imag())) || derivative == Complex(0.0, 0.0)) {
      return {false, lambda};
    }
    const Complex step = d0.mantissa / derivative;
    double damping = 1.0;
    bool accepted = false;
    Complex trial;
    kernels::ScaledDet dt;
    for (int bt = 0; bt < 30; ++bt) {
      trial = lambda - damping * step;
      dt = eval(trial);
      if (dt.is_zero() || dt.log_abs() < d0.log_abs()) {
        accepted = true;
        break;
      }
      damping *= 0.5;
    }
    const double tiny = 1e-11 * (1.0 + std::abs(lambda));
    if (!accepted) {
      // At the rounding floor of the determinant no step decreases it.
      return {std::abs(step) <= 1e3 * tiny, lambda};
    }
    lambda = trial;
    d0 = dt;
    if (std::abs(damping * step) <= tiny) return {true, lambda};
  }
  return {false, lambda};
}

struct Rect {
  double re0, re1, im0, im1;
  Complex center() const { return {0.5 * (re0 + re1), 0.5 * (im0 + im1)}; }
};

class Scanner {
 public:
  Scanner(const SteadyLinearization& lin, const ScanOptions& opts)
      : eval_{lin.char_matrices(), lin.tau}, opts_(opts) {}

  RootSet run();

 private:
  Complex phase_at(Complex lambda) const { return eval_(lambda).phase(); }
  double edge_increment(Complex a, Complex b, Complex pa, Complex pb, int depth) const;
  int winding(const Rect& r) const;
  void process_cell(const Rect& cell, int winding_number, int depth);
  void try_newton(Complex start);
  void add_root(Complex lambda);

  DdeEvaluator eval_;
  ScanOptions opts_;
  ScanWindow window_;
  std::vector<Root> roots_;
  int dropped_ = 0;
};

double Scanner::edge_increment(Complex a, Complex b, Complex pa, Complex pb, int depth) const {
  if (pa == Complex(0.0, 0.0) || pb == Complex(0.0, 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double delta = std::arg(pb / pa);
  if (std::abs(delta) <= opts_.max_phase_step || depth >= 16) return delta;
  const Complex mid = 0.5 * (a + b);
  const Complex pm = phase_at(mid);
  return edge_increment(a, mid, pa, pm, depth + 1) + edge_increment(mid, b, pm, pb, depth + 1);
}

int Scanner::winding(const Rect& r) const {
  const Complex c00(r.re0, r.im0), c10(r.re1, r.im0), c11(r.re1, r.im1), c01(r.re0, r.im1);
  const Complex p00 = phase_at(c00), p10 = phase_at(c10), p11 = phase_at(c11), p01 = phase_at(c01);
  const double total = edge_increment(c00, c10, p00, p10, 0) + edge_increment(c10, c11, p10, p11, 0) +
                       edge_increment(c11, c01, p11, p01, 0) + edge_increment(c01, c00, p01, p00, 0);
  if (std::isnan(total)) return 1;  // a corner sits on a root
  return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

void Scanner::add_root(Complex lambda) {
  if (std::abs(lambda.imag()) <= 1e-9 * (1.0 + std::abs(lambda))) {
    const Complex real_axis(lambda.real(), 0.0);
    if (eval_.residual(real_axis) <= opts_.residual_tol) lambda = real_axis;
  }
  if (lambda.imag() < 0.0) lambda = std::conj(lambda);

  const double margin = 1e-9 * (1.0 + std::abs(lambda));
  const double im_lo = std::max(0.0, window_.im_min);
  if (lambda.real() < window_.re_min - margin || lambda.real() > window_.re_max + margin ||
      lambda.imag() < im_lo - margin || lambda.imag() > window_.im_max + margin) {
    return;
  }
  const double residual = eval_.residual(lambda);
  if (!(residual <= opts_.residual_tol)) {
    ++dropped_;
    spdlog::debug("root candidate {}+{}i dropped: residual {}", lambda.real(), lambda.imag(), residual);
    return;
  }
  for (const auto& r : roots_) {
    if (std::abs(r.value - lambda) <= opts_.dedup_radius) return;
  }
  roots_.push_back({lambda, residual, RootMethod::transcendental});
}

void Scanner::try_newton(Complex start) {
  const NewtonResult res = newton_refine(eval_, start, opts_.newton_max_iter);
  if (!res.converged) {
    ++dropped_;
    spdlog::debug("Newton did not converge from {}+{}i", start.real(), start.imag());
    return;
  }
  add_root(res.root);
}

void Scanner::process_cell(const Rect& cell, int winding_number, int depth) {
  if (winding_number <= 1 || depth >= opts_.max_subdivision) {
    try_newton(cell.center());
    if (winding_number < 1 || depth >= opts_.max_subdivision) return;
    // Accept when the new root lies in (a slightly enlarged) cell.
    const double pad_re = 0.5 * (cell.re1 - cell.re0);
    const double pad_im = 0.5 * (cell.im1 - cell.im0);
    auto inside = [&](Complex z) {
      return z.real() >= cell.re0 - pad_re && z.real() <= cell.re1 + pad_re &&
             std::abs(z.imag()) >= std::min(std::abs(cell.im0), std::abs(cell.im1)) - pad_im - std::abs(cell.im1 - cell.im0) &&
             std::abs(z.imag()) <= std::max(std::abs(cell.im0), std::abs(cell.im1)) + pad_im;
    };
    for (const Root& r : roots_) {
      if (inside(r.value)) return;
    }
  }
  const double re_mid = 0.5 * (cell.re0 + cell.re1);
  const double im_mid = 0.5 * (cell.im0 + cell.im1);
  const Rect quads[4] = {{cell.re0, re_mid, cell.im0, im_mid},
                         {re_mid, cell.re1, cell.im0, im_mid},
                         {cell.re0, re_mid, im_mid, cell.im1},
                         {re_mid, cell.re1, im_mid, cell.im1}};
  int found = 0;
  for (const Rect& q : quads) {
    const int w = winding(q);
    if (w >= 1) {
      found += w;
      process_cell(q, w, depth + 1);
    }
  }
  if (found < winding_number) {
    // Phase sampling missed a root; fall back to a Newton start per quadrant.
    for (const Rect& q : quads) try_newton(q.center());
  }
}

RootSet Scanner::run() {
  window_ = opts_.window;
  const ScanWindow& w = window_;
  if (w.re_points < 16 || w.im_points < 16) throw ConfigError("scan grid needs at least 16 points per axis");
  if (!(w.re_max > w.re_min) || !(w.im_max > w.im_min)) throw ConfigError("empty scan window");

  const int nre = w.re_points;
  const int nim = w.im_points;
  std::vector<double> xs(static_cast<std::size_t>(nre));
  std::vector<double> ys(static_cast<std::size_t>(nim));
  for (int i = 0; i < nre; ++i) xs[static_cast<std::size_t>(i)] = w.re_min + (w.re_max - w.re_min) * i / (nre - 1);
  double im_lo = w.im_min;
  if (w.im_min == 0.0) im_lo = -0.5 * (w.im_max - w.im_min) / (nim - 1);
  for (int j = 0; j < nim; ++j) ys[static_cast<std::size_t>(j)] = im_lo + (w.im_max - im_lo) * j / (nim - 1);

  // Grid sampling, parallel over rows; each row is written by one thread.
  std::vector<kernels::ScaledDet> grid(static_cast<std::size_t>(nre) * static_cast<std::size_t>(nim));
  auto eval_rows = [&](int row_begin, int row_end) {
    std::vector<Complex> lambdas(static_cast<std::size_t>(nre));
    std::vector<Complex> factors(static_cast<std::size_t>(nre) * eval_.tau.size());
    for (int j = row_begin; j < row_end; ++j) {
      for (int i = 0; i < nre; ++i) {
        const Complex lambda(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]);
        lambdas[static_cast<std::size_t>(i)] = lambda;
        for (std::size_t d = 0; d < eval_.tau.size(); ++d) {
          factors[static_cast<std::size_t>(i) * eval_.tau.size() + d] = std::exp(-eval_.tau[d] * lambda);
        }
      }
      kernels::char_det_batch(eval_.mats, lambdas, factors,
                              std::span(grid).subspan(static_cast<std::size_t>(j) * static_cast<std::size_t>(nre), static_cast<std::size_t>(nre)));
    }
  };
  const int threads = std::max(1, std::min(opts_.threads, nim));
  if (threads == 1) {
    eval_rows(0, nim);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      const int begin = nim * t / threads;
      const int end = nim * (t + 1) / threads;
      pool.emplace_back(eval_rows, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  auto node = [&](int i, int j) -> const kernels::ScaledDet& {
    return grid[static_cast<std::size_t>(j) * static_cast<std::size_t>(nre) + static_cast<std::size_t>(i)];
  };

  if (opts_.field != nullptr) {
    GridField& f = *opts_.field;
    f.re = xs;
    f.im = ys;
    f.log10_abs.resize(nim, nre);
    f.phase_cos.resize(nim, nre);
    f.phase_sin.resize(nim, nre);
    for (int j = 0; j < nim; ++j) {
      for (int i = 0; i < nre; ++i) {
        const auto& d = node(i, j);
        f.log10_abs(j, i) = d.log_abs() / std::log(10.0);
        f.phase_cos(j, i) = d.phase().real();
        f.phase_sin(j, i) = d.phase().imag();
      }
    }
  }

  // Phase increments along grid edges, resampled where the phase moves fast.
  std::vector<double> h_inc(static_cast<std::size_t>(nre - 1) * static_cast<std::size_t>(nim));
  std::vector<double> v_inc(static_cast<std::size_t>(nre) * static_cast<std::size_t>(nim - 1));
  for (int j = 0; j < nim; ++j) {
    for (int i = 0; i + 1 < nre; ++i) {
      const Complex a(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]);
      const Complex b(xs[static_cast<std::size_t>(i + 1)], ys[static_cast<std::size_t>(j)]);
      h_inc[static_cast<std::size_t>(j) * static_cast<std::size_t>(nre - 1) + static_cast<std::size_t>(i)] =
          edge_increment(a, b, node(i, j).phase(), node(i + 1, j).phase(), 0);
    }
  }
  for (int j = 0; j + 1 < nim; ++j) {
    for (int i = 0; i < nre; ++i) {
      const Complex a(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]);
      const Complex b(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j + 1)]);
      v_inc[static_cast<std::size_t>(j) * static_cast<std::size_t>(nre) + static_cast<std::size_t>(i)] =
          edge_increment(a, b, node(i, j).phase(), node(i, j + 1).phase(), 0);
    }
  }
  auto h_at = [&](int i, int j) { return h_inc[static_cast<std::size_t>(j) * static_cast<std::size_t>(nre - 1) + static_cast<std::size_t>(i)]; };
  auto v_at = [&](int i, int j) { return v_inc[static_cast<std::size_t>(j) * static_cast<std::size_t>(nre) + static_cast<std::size_t>(i)]; };

  for (int j = 0; j + 1 < nim; ++j) {
    for (int i = 0; i + 1 < nre; ++i) {
      const double total = h_at(i, j) + v_at(i + 1, j) - h_at(i, j + 1) - v_at(i, j);
      int wn = std::isnan(total) ? 1 : static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));

      bool re_pos = false, re_neg = false, im_pos = false, im_neg = false;
      for (const auto* d : {&node(i, j), &node(i + 1, j), &node(i, j + 1), &node(i + 1, j + 1)}) {
        re_pos |= d->mantissa.real() > 0.0;
        re_neg |= d->mantissa.real() < 0.0;
        im_pos |= d->mantissa.imag() > 0.0;
        im_neg |= d->mantissa.imag() < 0.0;
      }
      const bool sign_change = re_pos && re_neg && im_pos && im_neg;
      if (wn <= 0 && !sign_change) continue;
      const Rect cell{xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(i + 1)],
                      ys[static_cast<std::size_t>(j)], ys[static_cast<std::size_t>(j + 1)]};
      process_cell(cell, std::max(wn, 0), 0);
    }
  }

  RootSet set;
  set.method = RootMethod::transcendental;
  set.window = w;
  set.dropped_candidates = dropped_;
  set.roots = std::move(roots_);
  std::sort(set.roots.begin(), set.roots.end(), [](const Root& a, const Root& b) {
    return a.value.real() != b.value.real() ? a.value.real() < b.value.real() : a.value.imag() < b.value.imag();
  });
  return set;
}

}  // namespace

double relative_residual_dde(const SteadyLinearization& lin, Complex lambda) {
  return relative_residual(lin.char_matrices(), lambda, delay_factors(lin, lambda));
}

RootSet find_roots_dde(const SteadyLinearization& lin, const ScanOptions& options) {
  Scanner scanner(lin, options);
  return scanner.run();
}

RootSet find_roots_approx(const SteadyLinearization& lin, double max_condition) {
  const int n = lin.n();
  Mat k = lin.a0;
  Mat m = Mat::Identity(n, n);
  for (int i = 0; i < lin.num_delays(); ++i) {
    k += lin.b[static_cast<std::size_t>(i)];
    m += lin.tau[static_cast<std::size_t>(i)] * lin.b[static_cast<std::size_t>(i)];
  }
  const Eigen::JacobiSVD<Mat> svd(m);
  const Vec sv = svd.singularValues();
  const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition)) {
    std::ostringstream msg;
    msg << "degenerate pencil: cond(M) = " << cond << " exceeds " << max_condition
        << "; some characteristic roots are at infinity";
    throw DegeneratePencil(cond, msg.str());
  }
  const Mat standard = m.partialPivLu().solve(k);
  const Eigen::EigenSolver<Mat> es(standard, false);
  if (es.info() != Eigen::Success) throw EvaluationError("eigenvalue iteration failed");

  const kernels::CharMatrices mats = lin.char_matrices();
  RootSet set;
  set.method = RootMethod::generalized_eigen;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const Complex lambda = es.eigenvalues()[i];
    set.roots.push_back({lambda, relative_residual(mats, lambda, linearized_delay_factors(lin, lambda)),
                         RootMethod::generalized_eigen});
  }
  std::sort(set.roots.begin(), set.roots.end(), [](const Root& a, const Root& b) {
    return a.value.real() != b.value.real() ? a.value.real() < b.value.real() : a.value.imag() < b.value.imag();
  });
  return set;
}

}  // namespace ddenoc
