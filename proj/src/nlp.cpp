#include "ddenoc/nlp.hpp"

#include <cmath>
#include <limits>

namespace ddenoc {

Vec NlpProblem::lower_bounds() const {
  return Vec::Constant(num_variables(), -std::numeric_limits<double>::infinity());
}

Vec NlpProblem::upper_bounds() const {
  return Vec::Constant(num_variables(), std::numeric_limits<double>::infinity());
}

ScaledProblem::ScaledProblem(const NlpProblem& raw, bool use_scales)
    : raw_(raw),
      s_(use_scales ? raw.variable_scales() : Vec::Ones(raw.num_variables())),
      sc_(use_scales ? raw.constraint_scales() : Vec::Ones(raw.num_constraints())) {
  if (s_.size() != raw.num_variables() || sc_.size() != raw.num_constraints()) {
    throw ConfigError("scale vectors do not match the problem dimensions");
  }
  if (!(s_.array() > 0.0).all() || !(sc_.array() > 0.0).all()) throw ConfigError("scales must be positive");
}

double ScaledProblem::objective(const Vec& w) const { return raw_.objective(to_raw(w)); }

Vec ScaledProblem::gradient(const Vec& w) const { return raw_.gradient(to_raw(w)).cwiseProduct(s_); }

Vec ScaledProblem::constraints(const Vec& w) const { return raw_.constraints(to_raw(w)).cwiseQuotient(sc_); }

SpMat ScaledProblem::jacobian(const Vec& w) const {
  SpMat j = raw_.jacobian(to_raw(w));
  for (int col = 0; col < j.outerSize(); ++col) {
    for (SpMat::InnerIterator it(j, col); it; ++it) it.valueRef() *= s_[it.col()] / sc_[it.row()];
  }
  return j;
}

Vec ScaledProblem::lower_bounds() const { return raw_.lower_bounds().cwiseQuotient(s_); }

Vec ScaledProblem::upper_bounds() const { return raw_.upper_bounds().cwiseQuotient(s_); }

std::optional<SpMat> ScaledProblem::objective_hessian(const Vec& w) const {
  auto h = raw_.objective_hessian(to_raw(w));
  if (!h) return std::nullopt;
  for (int col = 0; col < h->outerSize(); ++col) {
    for (SpMat::InnerIterator it(*h, col); it; ++it) it.valueRef() *= s_[it.row()] * s_[it.col()];
  }
  return h;
}

void bound_multipliers(const Vec& g, const Vec& w, const Vec& lower, const Vec& upper,
                       Vec& nu_lower, Vec& nu_upper) {
  nu_lower = Vec::Zero(w.size());
  nu_upper = Vec::Zero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] <= lower[i] && g[i] > 0.0) nu_lower[i] = g[i];
    if (w[i] >= upper[i] && g[i] < 0.0) nu_upper[i] = -g[i];
  }
}

KktResidual kkt_residual(const NlpProblem& problem, const Vec& w, const Vec& mu,
                         const Vec& nu_lower, const Vec& nu_upper) {
  const int n = problem.num_variables();
  const int m = problem.num_constraints();
  if (w.size() != n || mu.size() != m || nu_lower.size() != n || nu_upper.size() != n) {
    throw ConfigError("kkt_residual: dimension mismatch");
  }
  KktResidual r;
  Vec g = problem.gradient(w) - nu_lower + nu_upper;
  if (m > 0) {
    g += problem.jacobian(w).transpose() * mu;
    r.feasibility = problem.constraints(w).lpNorm<Eigen::Infinity>();
  }
  r.stationarity = n > 0 ? g.lpNorm<Eigen::Infinity>() : 0.0;
  const Vec lo = problem.lower_bounds();
  const Vec hi = problem.upper_bounds();
  double comp = 0.0;
  for (int i = 0; i < n; ++i) {
    comp = std::max({comp, -nu_lower[i], -nu_upper[i]});
    if (nu_lower[i] != 0.0) comp = std::max(comp, std::abs(nu_lower[i] * (w[i] - lo[i])));
    if (nu_upper[i] != 0.0) comp = std::max(comp, std::abs(nu_upper[i] * (hi[i] - w[i])));
  }
  r.complementarity = comp;
  return r;
}

const char* status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

void SolveOptions::validate() const {
  if (!(tol_stat > 0.0 && tol_feas > 0.0 && tol_comp > 0.0)) throw ConfigError("solver tolerances must be > 0");
  if (max_outer < 1 || max_inner < 1) throw ConfigError("solver iteration caps must be >= 1");
  if (lbfgs_memory < 0) throw ConfigError("lbfgs_memory must be >= 0");
  if (!(penalty_init > 0.0 && penalty_growth > 1.0 && penalty_max >= penalty_init)) {
    throw ConfigError("penalty schedule must satisfy 0 < init <= max and growth > 1");
  }
  if (!(feas_reduction > 0.0 && feas_reduction < 1.0)) throw ConfigError("feas_reduction must lie in (0, 1)");
}

}  // namespace ddenoc
