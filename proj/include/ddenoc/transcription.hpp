#pragma once

#include "ddenoc/dde_model.hpp"
#include "ddenoc/nlp.hpp"
#include "ddenoc/ocp.hpp"
#include "ddenoc/trajectory.hpp"

#include <memory>
#include <vector>

namespace ddenoc {

/// Backward-difference estimate of x(t - tau) at the right end of a step:
/// v = x_next - (x_next - x_prev) / dt * tau.
Vec linearized_delayed_state(const VecRef& x_prev, const VecRef& x_next, double dt, double tau);

/// Implicit Euler residual of the delay-linearized system over one step,
/// R = x_next - x_prev - f(x_next, z, u, d) dt, with its partial derivatives.
struct StepEvaluation {
  Vec residual;
  Mat d_next;  ///< dR / dx_next
  Mat d_prev;  ///< dR / dx_prev
  Mat d_u;     ///< dR / du
};

StepEvaluation evaluate_step(const DdeModel& model, const VecRef& x_prev, const VecRef& x_next,
                             const VecRef& u, const VecRef& d, double dt, bool with_jacobians = true);

/// The finite-dimensional problem obtained by implicit Euler with M steps per
/// control interval. Decision vector per interval k: x_{k,1}, ..., x_{k,M}, u_k.
/// The initial state x_{0,0} = x0(t0) and the interval continuity conditions
/// are eliminated.
class TranscribedNlp final : public NlpProblem {
 public:
  TranscribedNlp(std::shared_ptr<const DdeModel> model, OcpSpec ocp, int steps_per_interval);

  const DdeModel& model() const { return *model_; }
  const OcpSpec& ocp() const { return ocp_; }
  int intervals() const { return ocp_.intervals; }
  int steps_per_interval() const { return m_; }
  double step_size() const { return ocp_.dt() / m_; }
  const Vec& initial_state() const { return x0_; }

  int num_variables() const override;
  int num_constraints() const override;

  /// Offset of x_{k,n}, n in [1, M].
  int state_offset(int k, int n) const;
  int input_offset(int k) const;
  /// First residual row of step n in interval k (the step ending at x_{k,n}).
  int residual_offset(int k, int n) const;

  /// Pack states (N*M entries, x_{k,n} for n >= 1 in time order) and inputs.
  Vec pack(const std::vector<Vec>& states, const std::vector<Vec>& inputs) const;
  /// Pack a trajectory sampled on this NLP's grid.
  Vec pack(const Trajectory& trajectory) const;
  /// States on the grid t_{k,n} (including t0) with ZOH inputs and model outputs.
  Trajectory extract_trajectory(const Vec& w) const;
  /// x_{k,n}; (0, 0) is the eliminated initial state.
  Vec state(const Vec& w, int k, int n) const;
  Vec input(const Vec& w, int k) const;
  /// Re-solves every step equation by Newton's method with the inputs of w
  /// held fixed, starting from the states in w, until
  /// |R_i| <= tol * max(1, |x_i|). Throws StepFailure if a step does not converge.
  Vec restore_states(const Vec& w, double tol, int max_iter) const;

  double objective(const Vec& w) const override;
  Vec gradient(const Vec& w) const override;
  Vec constraints(const Vec& w) const override;
  SpMat jacobian(const Vec& w) const override;
  Vec lower_bounds() const override;
  Vec upper_bounds() const override;
  Vec variable_scales() const override;
  Vec constraint_scales() const override;
  std::optional<SpMat> objective_hessian(const Vec& w) const override;

 private:
  void check_size(const Vec& w) const;

  std::shared_ptr<const DdeModel> model_;
  OcpSpec ocp_;
  int m_;
  Vec x0_;
};

}  // namespace ddenoc
