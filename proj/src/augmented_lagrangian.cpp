#include "ddenoc/nlp.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace ddenoc {
namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

Vec project(const Vec& x, const Vec& lo, const Vec& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

/// Augmented Lagrangian L = psi + mu^T c + rho/2 |c|^2 and its parts at one point.
struct Point {
  Vec x;
  double psi = 0.0;
  Vec c;
  SpMat jac;
  double merit = 0.0;
  Vec grad;  ///< gradient of the augmented Lagrangian
  bool finite = false;
};

class InnerSolver {
 public:
  InnerSolver(const NlpProblem& p, const SolveOptions& opts, const Vec& lo, const Vec& hi)
      : p_(p), opts_(opts), lo_(lo), hi_(hi) {}

  Point evaluate(const Vec& x, const Vec& mu, double rho, bool with_jacobian) const;

  /// Minimizes the augmented Lagrangian over the box from `start`.
  /// Returns false on a line-search failure; `point` then holds the last good iterate.
  bool minimize(Point& point, const Vec& mu, double rho, double omega, std::vector<double>& trace, int& iterations);

 private:
  Vec direction(const Point& pt, const std::vector<bool>& active, const Vec& mu, double rho, double gamma);
  Vec apply_h0(const Point& pt, const std::vector<bool>& active, const Vec& mu, double rho, double gamma,
               const Vec& q);
  void build_colouring(const SpMat& jac);
  SpMat constraint_curvature(const Vec& x, const Vec& lambda) const;

  const NlpProblem& p_;
  const SolveOptions& opts_;
  Vec lo_;
  Vec hi_;
  std::deque<std::pair<Vec, Vec>> pairs_;
  // Hessian sparsity and colour groups, fixed by the structural Jacobian pattern.
  std::vector<std::vector<int>> neighbours_;
  std::vector<std::vector<int>> groups_;
  // Levenberg-Marquardt style shift, kept across iterations.
  double shift_ = 1e-8;
};

Point InnerSolver::evaluate(const Vec& x, const Vec& mu, double rho, bool with_jacobian) const {
  Point pt;
  pt.x = x;
  try {
    pt.psi = p_.objective(x);
    pt.c = p_.constraints(x);
    if (!std::isfinite(pt.psi) || !all_finite(pt.c)) return pt;
    pt.merit = pt.psi + mu.dot(pt.c) + 0.5 * rho * pt.c.squaredNorm();
    if (!with_jacobian) {
      pt.finite = std::isfinite(pt.merit);
      return pt;
    }
    pt.grad = p_.gradient(x);
    if (pt.c.size() > 0) {
      pt.jac = p_.jacobian(x);
      pt.grad += pt.jac.transpose() * (mu + rho * pt.c);
    }
    pt.finite = std::isfinite(pt.merit) && all_finite(pt.grad);
  } catch (const Error& e) {
    spdlog::debug("evaluation failed: {}", e.what());
    pt.finite = false;
  }
  return pt;
}

void InnerSolver::build_colouring(const SpMat& jac) {
  const auto n = static_cast<std::size_t>(jac.cols());
  std::vector<std::vector<int>> row_cols(static_cast<std::size_t>(jac.rows()));
  for (int col = 0; col < jac.outerSize(); ++col) {
    for (SpMat::InnerIterator it(jac, col); it; ++it) row_cols[static_cast<std::size_t>(it.row())].push_back(col);
  }
  neighbours_.assign(n, {});
  for (int col = 0; col < jac.outerSize(); ++col) {
    auto& nb = neighbours_[static_cast<std::size_t>(col)];
    for (SpMat::InnerIterator it(jac, col); it; ++it) {
      const auto& cols = row_cols[static_cast<std::size_t>(it.row())];
      nb.insert(nb.end(), cols.begin(), cols.end());
    }
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  // Columns in one group must not share a Hessian row.
  std::vector<int> colour(n, -1);
  std::vector<int> mark;
  int colours = 0;
  for (std::size_t j = 0; j < n; ++j) {
    mark.assign(static_cast<std::size_t>(colours) + 1, 0);
    for (int i : neighbours_[j]) {
      for (int k : neighbours_[static_cast<std::size_t>(i)]) {
        const int c = colour[static_cast<std::size_t>(k)];
        if (c >= 0) mark[static_cast<std::size_t>(c)] = 1;
      }
    }
    int c = 0;
    while (mark[static_cast<std::size_t>(c)] != 0) ++c;
    colour[j] = c;
    colours = std::max(colours, c + 1);
  }
  groups_.assign(static_cast<std::size_t>(colours), {});
  for (std::size_t j = 0; j < n; ++j) groups_[static_cast<std::size_t>(colour[j])].push_back(static_cast<int>(j));
}

SpMat InnerSolver::constraint_curvature(const Vec& x, const Vec& lambda) const {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Triplet<double>> trips;
  const double rel = std::cbrt(std::numeric_limits<double>::epsilon());
  Vec step = Vec::Zero(n);
  for (const auto& group : groups_) {
    for (int j : group) step[j] = rel * std::max(1.0, std::abs(x[j]));
    const Vec gp = p_.jacobian(x + step).transpose() * lambda;
    const Vec gm = p_.jacobian(x - step).transpose() * lambda;
    for (int j : group) {
      for (int i : neighbours_[static_cast<std::size_t>(j)]) {
        trips.emplace_back(i, j, 0.5 * (gp[i] - gm[i]) / (2.0 * step[j]));
        trips.emplace_back(j, i, 0.5 * (gp[i] - gm[i]) / (2.0 * step[j]));
      }
    }
    for (int j : group) step[j] = 0.0;
  }
  SpMat h(n, n);
  h.setFromTriplets(trips.begin(), trips.end());
  return h;
}

Vec InnerSolver::apply_h0(const Point& pt, const std::vector<bool>& active, const Vec& mu, double rho,
                          double gamma, const Vec& q) {
  const Eigen::Index n = q.size();
  if (opts_.preconditioner == Preconditioner::none) return q / gamma;
  const auto hobj = p_.objective_hessian(pt.x);
  const bool has_c = pt.c.size() > 0;
  if (!hobj && !has_c) return q / gamma;

  SpMat h(n, n);
  if (has_c) {
    h = rho * SpMat(pt.jac.transpose() * pt.jac);
    if (opts_.preconditioner == Preconditioner::hessian_fd) {
      if (groups_.empty()) build_colouring(pt.jac);
      h += constraint_curvature(pt.x, mu + rho * pt.c);
    }
  }
  if (hobj) h += *hobj;
  const double floor_shift = hobj ? 0.0 : gamma;
  std::vector<Eigen::Triplet<double>> base;
  base.reserve(static_cast<std::size_t>(h.nonZeros() + n));
  for (int col = 0; col < h.outerSize(); ++col) {
    for (SpMat::InnerIterator it(h, col); it; ++it) {
      if (active[static_cast<std::size_t>(it.row())] || active[static_cast<std::size_t>(it.col())]) continue;
      base.emplace_back(it.row(), it.col(), it.value());
    }
  }
  // Raise the shift until the free block is positive definite.
  for (int attempt = 0; attempt < 30; ++attempt) {
    const double shift = std::max(shift_, floor_shift);
    std::vector<Eigen::Triplet<double>> trips = base;
    for (Eigen::Index i = 0; i < n; ++i) trips.emplace_back(i, i, active[static_cast<std::size_t>(i)] ? 1.0 : shift);
    SpMat reduced(n, n);
    reduced.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SpMat> ldlt(reduced);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
      if (opts_.verbosity > 1) spdlog::debug("    h0 shift {:.3e} after {} attempts", shift, attempt);
      Vec r = ldlt.solve(q);
      if (r.allFinite()) return r;
    }
    shift_ = std::max(10.0 * shift_, 1e-8);
  }
  return q / gamma;
}

Vec InnerSolver::direction(const Point& pt, const std::vector<bool>& active, const Vec& mu, double rho,
                           double gamma) {
  auto mask = [&](Vec v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (active[static_cast<std::size_t>(i)]) v[i] = 0.0;
    }
    return v;
  };
  Vec q = mask(pt.grad);
  const std::size_t k = pairs_.size();
  std::vector<double> alpha(k);
  for (std::size_t j = k; j-- > 0;) {
    const Vec s = mask(pairs_[j].first);
    const Vec y = mask(pairs_[j].second);
    const double sy = s.dot(y);
    if (!(sy > 0.0)) {
      alpha[j] = 0.0;
      continue;
    }
    alpha[j] = s.dot(q) / sy;
    q -= alpha[j] * y;
  }
  Vec r = mask(apply_h0(pt, active, mu, rho, gamma, q));
  for (std::size_t j = 0; j < k; ++j) {
    const Vec s = mask(pairs_[j].first);
    const Vec y = mask(pairs_[j].second);
    const double sy = s.dot(y);
    if (!(sy > 0.0)) continue;
    const double beta = y.dot(r) / sy;
    r += s * (alpha[j] - beta);
  }
  return -r;
}

bool InnerSolver::minimize(Point& pt, const Vec& mu, double rho, double omega, std::vector<double>& trace,
                           int& iterations) {
  pairs_.clear();
  const Eigen::Index n = pt.x.size();
  double gamma = 1.0;  // Hessian scale estimate y^T y / s^T y
  for (int it = 0; it < opts_.max_inner; ++it) {
    const Vec pg = pt.x - project(pt.x - pt.grad, lo_, hi_);
    const double pg_norm = pg.lpNorm<Eigen::Infinity>();
    if (pg_norm <= omega) return true;

    const double eps = std::min(1e-2, pg_norm);
    std::vector<bool> active(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = pt.x[i] - lo_[i] <= eps && pt.grad[i] > 0.0;
      const bool at_hi = hi_[i] - pt.x[i] <= eps && pt.grad[i] < 0.0;
      active[static_cast<std::size_t>(i)] = at_lo || at_hi;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Vec d = direction(pt, active, mu, rho, gamma);
      double slope = pt.grad.dot(d);
      if (!(slope < 0.0) || !all_finite(d)) {
        pairs_.clear();
        d = -pt.grad;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (active[static_cast<std::size_t>(i)]) d[i] = 0.0;
        }
        d /= gamma;
        slope = pt.grad.dot(d);
      }
      double step = 1.0;
      for (int bt = 0; bt < 50; ++bt) {
        const Vec trial_x = project(pt.x + step * d, lo_, hi_);
        const Vec s = trial_x - pt.x;
        const double decrease = pt.grad.dot(s);
        if (s.lpNorm<Eigen::Infinity>() == 0.0) break;
        const Point trial = evaluate(trial_x, mu, rho, false);
        if (trial.finite && trial.merit <= pt.merit + 1e-4 * std::min(decrease, 0.0)) {
          if (!(trial.merit <= pt.merit)) break;
          Point full = evaluate(trial_x, mu, rho, true);
          if (!full.finite) break;
          const Vec y = full.grad - pt.grad;
          const double sy = s.dot(y);
          if (sy > 1e-12 * s.norm() * y.norm() && opts_.lbfgs_memory > 0) {
            pairs_.emplace_back(s, y);
            if (static_cast<int>(pairs_.size()) > opts_.lbfgs_memory) pairs_.pop_front();
            gamma = y.squaredNorm() / sy;
          }
          // Short steps mean the local model is poor: damp more; full steps: damp less.
          if (step == 1.0) {
            shift_ = std::max(0.25 * shift_, 1e-12);
          } else if (step < 0.25) {
            shift_ = std::max(4.0 * shift_, 1e-8);
          }
          pt = std::move(full);
          trace.push_back(pt.merit);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        if (pairs_.empty() && attempt == 0 && opts_.preconditioner == Preconditioner::none) break;
        pairs_.clear();
      }
    }
    ++iterations;
    if (opts_.verbosity > 1) {
      spdlog::debug("  inner {:4d}  merit {:.12e}  pg {:.3e}  pairs {}  active {}  accepted {}", it, pt.merit,
                    pg_norm, pairs_.size(), std::count(active.begin(), active.end(), true), accepted);
    }
    if (!accepted) {
      // Stalled at rounding level: accept the point if it is already stationary enough.
      return pg_norm <= 10.0 * omega;
    }
  }
  return true;
}

}  // namespace

SolveReport solve(const NlpProblem& problem, const Vec& w0, const SolveOptions& options) {
  options.validate();
  const int n = problem.num_variables();
  const int m = problem.num_constraints();
  if (w0.size() != n) throw ConfigError("solve: w0 has the wrong length");
  if (!all_finite(w0)) throw ConfigError("solve: w0 is not finite");

  const ScaledProblem sp(problem, options.scale);
  const Vec lo = sp.lower_bounds();
  const Vec hi = sp.upper_bounds();
  if (!((lo.array() <= hi.array()).all())) throw ConfigError("solve: lower bound above upper bound");

  InnerSolver inner(sp, options, lo, hi);
  SolveReport report;
  Vec mu = Vec::Zero(m);
  double rho = options.penalty_init;

  Point pt = inner.evaluate(project(sp.to_scaled(w0), lo, hi), mu, rho, true);
  if (!pt.finite) throw EvaluationError("solve: evaluators are not finite at the initial point");

  const double gscale = std::max(1.0, sp.gradient(pt.x).lpNorm<Eigen::Infinity>());
  const double tol_stat = options.tol_stat * gscale;
  report.tol_stat_effective = tol_stat;
  double omega = std::max(0.5 * tol_stat, 1e-1 * gscale);
  double best_feas = m > 0 ? pt.c.lpNorm<Eigen::Infinity>() : 0.0;

  Vec mu_est = mu;
  Vec nu_lo, nu_hi;
  KktResidual kkt;
  report.status = SolveStatus::max_iter;

  for (int outer = 1; outer <= options.max_outer; ++outer) {
    std::vector<double> trace;
    const bool ok = inner.minimize(pt, mu, rho, omega, trace, report.inner_iterations);
    report.merit_trace.push_back(std::move(trace));
    report.outer_iterations = outer;

    mu_est = m > 0 ? Vec(mu + rho * pt.c) : mu;
    Vec g = sp.gradient(pt.x);
    if (m > 0) g += pt.jac.transpose() * mu_est;
    bound_multipliers(g, pt.x, lo, hi, nu_lo, nu_hi);
    kkt.stationarity = (g - nu_lo + nu_hi).lpNorm<Eigen::Infinity>();
    kkt.feasibility = m > 0 ? pt.c.lpNorm<Eigen::Infinity>() : 0.0;
    kkt.complementarity = 0.0;  // iterates sit exactly on the bounds they touch

    IterationRecord rec;
    rec.iter = outer;
    rec.objective = pt.psi;
    rec.feasibility = m > 0 ? problem.constraints(sp.to_raw(pt.x)).lpNorm<Eigen::Infinity>() : 0.0;
    rec.stationarity = kkt.stationarity;
    rec.penalty = rho;
    report.history.push_back(rec);
    if (options.verbosity > 0) {
      spdlog::info("outer {:3d}  psi {:.10e}  feas {:.3e}  stat {:.3e}  rho {:.1e}  inner {}", outer, rec.objective,
                   rec.feasibility, rec.stationarity, rho, report.inner_iterations);
    }

    if (kkt.feasibility <= options.tol_feas && kkt.stationarity <= tol_stat && kkt.complementarity <= options.tol_comp) {
      report.status = SolveStatus::converged;
      break;
    }
    if (!ok) {
      report.status = SolveStatus::line_search_failure;
      report.message = "line search failed in the inner solver";
      break;
    }

    if (kkt.feasibility <= options.feas_reduction * best_feas || kkt.feasibility <= options.tol_feas) {
      mu = mu_est;
      best_feas = kkt.feasibility;
      omega = std::max(0.5 * tol_stat, 0.1 * omega);
    } else {
      if (rho >= options.penalty_max) {
        mu = mu_est;  // penalty exhausted: fall back to first-order multiplier steps
      }
      rho = std::min(rho * options.penalty_growth, options.penalty_max);
      omega = std::max(0.5 * tol_stat, 0.1 * omega);
    }
    pt = inner.evaluate(pt.x, mu, rho, true);
    if (!pt.finite) {
      report.status = SolveStatus::line_search_failure;
      report.message = "augmented Lagrangian became non-finite";
      break;
    }
  }
  if (report.status == SolveStatus::max_iter) report.message = "outer iteration limit reached";

  report.kkt_scaled = kkt;
  report.w = sp.to_raw(pt.x);
  report.mu = mu_est.cwiseQuotient(sp.row_scale());
  report.nu_lower = nu_lo.cwiseQuotient(sp.variable_scale());
  report.nu_upper = nu_hi.cwiseQuotient(sp.variable_scale());
  report.objective = problem.objective(report.w);
  report.kkt = kkt_residual(problem, report.w, report.mu, report.nu_lower, report.nu_upper);
  return report;
}

}  // namespace ddenoc
