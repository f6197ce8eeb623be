#pragma once

#include "ddenoc/common.hpp"

#include <Eigen/SparseCore>

#include <optional>
#include <string>
#include <vector>

namespace ddenoc {

using SpMat = Eigen::SparseMatrix<double>;

/// minimize psi(w) subject to c(w) = 0 and lower <= w <= upper.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_variables() const = 0;
  virtual int num_constraints() const = 0;

  virtual double objective(const Vec& w) const = 0;
  virtual Vec gradient(const Vec& w) const = 0;
  virtual Vec constraints(const Vec& w) const = 0;
  /// Sparse constraint Jacobian with a pattern independent of w.
  virtual SpMat jacobian(const Vec& w) const = 0;

  virtual Vec lower_bounds() const;
  virtual Vec upper_bounds() const;

  /// Characteristic magnitudes of the variables and constraint rows.
  virtual Vec variable_scales() const { return Vec::Ones(num_variables()); }
  virtual Vec constraint_scales() const { return Vec::Ones(num_constraints()); }

  /// Symmetric approximation of the objective Hessian for preconditioning;
  /// nullopt when none is available.
  virtual std::optional<SpMat> objective_hessian(const Vec&) const { return std::nullopt; }
};

/// The problem in the variables w~ = w / s with rows c~ = c / s_c.
class ScaledProblem final : public NlpProblem {
 public:
  /// With use_scales = false every scale is one and the adaptor forwards.
  explicit ScaledProblem(const NlpProblem& raw, bool use_scales = true);

  int num_variables() const override { return raw_.num_variables(); }
  int num_constraints() const override { return raw_.num_constraints(); }
  double objective(const Vec& w) const override;
  Vec gradient(const Vec& w) const override;
  Vec constraints(const Vec& w) const override;
  SpMat jacobian(const Vec& w) const override;
  Vec lower_bounds() const override;
  Vec upper_bounds() const override;
  std::optional<SpMat> objective_hessian(const Vec& w) const override;

  Vec to_scaled(const Vec& w) const { return w.cwiseQuotient(s_); }
  Vec to_raw(const Vec& w) const { return w.cwiseProduct(s_); }
  const Vec& variable_scale() const { return s_; }
  const Vec& row_scale() const { return sc_; }

 private:
  const NlpProblem& raw_;
  Vec s_;
  Vec sc_;
};

/// First-order optimality measures, all infinity norms.
struct KktResidual {
  double stationarity = 0.0;    ///< |grad psi + J^T mu - nu_lo + nu_hi|
  double feasibility = 0.0;     ///< |c(w)|
  double complementarity = 0.0; ///< max of nu * bound gap and negative parts of nu
};

KktResidual kkt_residual(const NlpProblem& problem, const Vec& w, const Vec& mu,
                         const Vec& nu_lower, const Vec& nu_upper);

/// Bound multipliers implied by a stationarity vector g = grad psi + J^T mu:
/// nonzero only on variables that sit exactly at a bound.
void bound_multipliers(const Vec& g, const Vec& w, const Vec& lower, const Vec& upper,
                       Vec& nu_lower, Vec& nu_upper);

enum class SolveStatus { converged, max_iter, line_search_failure };
const char* status_name(SolveStatus status);

/// Initial inverse-Hessian model of the inner L-BFGS recursion.
///  none:          scaled identity
///  gauss_newton:  objective Hessian + rho J^T J
///  hessian_fd:    gauss_newton plus the constraint curvature sum_i lambda_i
///                 d^2 c_i, finite-differenced from J^T lambda with a column
///                 colouring of the Jacobian pattern
enum class Preconditioner { none, gauss_newton, hessian_fd };

struct SolveOptions {
  int max_outer = 60;
  int max_inner = 400;
  int lbfgs_memory = 8;
  double tol_stat = 1e-5;
  double tol_feas = 1e-6;
  double tol_comp = 1e-6;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e10;
  double feas_reduction = 0.25;  ///< feasibility must shrink by this factor per outer step
  Preconditioner preconditioner = Preconditioner::hessian_fd;
  bool scale = true;
  int verbosity = 0;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double feasibility = 0.0;
  double stationarity = 0.0;
  double penalty = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::max_iter;
  Vec w;
  Vec mu;        ///< equality multipliers of the unscaled problem
  Vec nu_lower;  ///< bound multipliers of the unscaled problem
  Vec nu_upper;
  KktResidual kkt;         ///< unscaled problem, recomputable via kkt_residual
  KktResidual kkt_scaled;  ///< scaled problem, used for termination
  double tol_stat_effective = 0.0;
  double objective = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  std::vector<IterationRecord> history;
  /// Augmented Lagrangian value after every accepted inner step, grouped per
  /// outer iteration.
  std::vector<std::vector<double>> merit_trace;
  std::string message;
};

/// Bound-constrained augmented Lagrangian with a projected L-BFGS inner solver.
SolveReport solve(const NlpProblem& problem, const Vec& w0, const SolveOptions& options = {});

}  // namespace ddenoc
