#pragma once

#include "ddenoc/common.hpp"

#include <string>
#include <vector>

namespace ddenoc {

class HistoryFunction;

/// Partial derivatives of the right-hand side f(x, z, u, d).
struct RhsJacobians {
  Mat fx;  ///< n_x x n_x
  Mat fz;  ///< n_x x n_z
  Mat fu;  ///< n_x x n_u
};

/// A delay differential equation with input-dependent delays
///
///   x'(t) = f(x(t), z(t), u(t), d(t)),
///   z(t)  = [h_1(x(t - tau_1(u))); ...; h_m(x(t - tau_m(u)))].
///
/// Model parameters are owned by the concrete model. Implementations must be
/// pure: every evaluator depends on its arguments only, so a model may be
/// shared read-only between threads.
///
/// The disturbance argument may be longer than nd(); models read the leading
/// nd() entries and ignore the rest (the tail carries cost-only signals such
/// as setpoints).
class DdeModel {
 public:
  virtual ~DdeModel() = default;

  virtual int nx() const = 0;
  virtual int nu() const = 0;
  virtual int nd() const { return 0; }
  virtual int num_delays() const = 0;
  /// Length of the delayed quantity r_i = h_i(x).
  virtual int delayed_dim(int i) const = 0;

  int nz() const;
  /// First row of block i inside z.
  int z_offset(int i) const;

  /// tau_i(u) in seconds.
  virtual double delay(int i, const VecRef& u) const = 0;
  /// d tau_i / du as a row of length nu().
  virtual RowVec delay_jacobian(int i, const VecRef& u) const = 0;
  /// Largest tau_i(u) over the box [u_min, u_max].
  virtual double max_delay(int i, const VecRef& u_min, const VecRef& u_max) const;

  virtual Vec rhs(const VecRef& x, const VecRef& z, const VecRef& u,
                  const VecRef& d) const = 0;
  virtual RhsJacobians rhs_jacobians(const VecRef& x, const VecRef& z,
                                     const VecRef& u, const VecRef& d) const = 0;

  virtual Vec delayed_map(int i, const VecRef& x) const = 0;
  virtual Mat delayed_map_jacobian(int i, const VecRef& x) const = 0;

  virtual std::vector<std::string> state_names() const;
  virtual std::vector<std::string> input_names() const;
  /// Names of model-specific derived outputs (e.g. generated power).
  virtual std::vector<std::string> output_names() const { return {}; }
  virtual Vec outputs(const VecRef& x, const VecRef& u) const;

  /// Characteristic magnitudes used for scaling the NLP and Newton tests.
  virtual Vec state_scales() const { return Vec::Ones(nx()); }
  virtual Vec input_scales() const { return Vec::Ones(nu()); }
};

/// z assembled from the current state, i.e. the memory state a constant
/// history equal to x produces.
Vec stacked_delayed_maps(const DdeModel& model, const VecRef& x);

/// max_i max_{u in box} tau_i(u).
double tau_max(const DdeModel& model, const VecRef& u_min, const VecRef& u_max);

/// Concatenation [h_1(x(t - tau_1(u))); ...; h_m(x(t - tau_m(u)))] with the
/// past read from `history`. Throws HistoryUnderflow naming the first delay
/// whose delayed time falls outside the history span.
Vec eval_memory_state(const DdeModel& model, const HistoryFunction& history,
                      double t, const VecRef& u);

}  // namespace ddenoc
