#pragma once

#include "ddenoc/dde_model.hpp"
#include "ddenoc/history.hpp"

#include <memory>
#include <vector>

namespace ddenoc {

/// Lagrange-term integrand Phi(x, u, d) with analytic derivatives.
class StageCost {
 public:
  virtual ~StageCost() = default;
  virtual double value(const VecRef& x, const VecRef& u, const VecRef& d) const = 0;
  virtual Vec grad_x(const VecRef& x, const VecRef& u, const VecRef& d) const = 0;
  virtual Vec grad_u(const VecRef& x, const VecRef& u, const VecRef& d) const = 0;
  /// d^2 Phi / dx^2; used only to precondition the solver, so an
  /// approximation is acceptable. Defaults to zero.
  virtual Mat hess_xx(const VecRef& x, const VecRef& u, const VecRef& d) const;
};

/// Phi = 0.
class ZeroCost final : public StageCost {
 public:
  double value(const VecRef&, const VecRef&, const VecRef&) const override { return 0.0; }
  Vec grad_x(const VecRef& x, const VecRef&, const VecRef&) const override { return Vec::Zero(x.size()); }
  Vec grad_u(const VecRef&, const VecRef& u, const VecRef&) const override { return Vec::Zero(u.size()); }
};

/// Phi = 0.5 * weight * (c^T x - d[setpoint_index])^2.
class TrackingCost final : public StageCost {
 public:
  TrackingCost(Vec c, int setpoint_index, double weight);

  double value(const VecRef& x, const VecRef& u, const VecRef& d) const override;
  Vec grad_x(const VecRef& x, const VecRef& u, const VecRef& d) const override;
  Vec grad_u(const VecRef& x, const VecRef& u, const VecRef& d) const override;
  Mat hess_xx(const VecRef& x, const VecRef& u, const VecRef& d) const override;

 private:
  Vec c_;
  int index_;
  double weight_;
};

/// Optimal control problem on [t0, tf] with N zero-order-hold intervals.
struct OcpSpec {
  double t0 = 0.0;
  double tf = 1.0;
  int intervals = 1;
  std::shared_ptr<const StageCost> stage_cost = std::make_shared<ZeroCost>();
  /// Input-rate weights: either one matrix for every interval or one per interval.
  std::vector<Mat> rate_weights;
  Vec u_ref;
  Vec x_min;
  Vec x_max;
  Vec u_min;
  Vec u_max;
  /// d_k per interval; empty means an empty vector on every interval.
  std::vector<Vec> disturbances;
  HistoryFunction history;

  double dt() const { return (tf - t0) / intervals; }
  const Mat& weight(int k) const;
  Vec disturbance(int k) const;

  /// Throws ConfigError on any violated invariant, naming the field.
  void validate(const DdeModel& model) const;
};

/// OCP with defaults filled from the model: unbounded states, the given input
/// box, identity weights and u_ref at the box centre.
OcpSpec make_ocp(const DdeModel& model, double t0, double tf, int intervals, HistoryFunction history);

}  // namespace ddenoc
