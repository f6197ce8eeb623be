#pragma once

#include "ddenoc/dde_model.hpp"
#include "ddenoc/history.hpp"
#include "ddenoc/trajectory.hpp"

#include <vector>

namespace ddenoc {

struct SimOptions {
  double step = 0.01;          ///< h [s]; shortened so interval boundaries are step boundaries
  double newton_tol = 1e-10;   ///< on |residual_i| / max(1, |x_i|)
  int newton_max_iter = 50;
  /// Committed history older than this span is discarded; 0 keeps everything.
  double retention = 0.0;

  void validate() const;
};

/// Zero-order-hold schedule: values[k] is active on [starts[k], starts[k+1]);
/// the first value also covers earlier times and the last extends to +infinity.
class InputSchedule {
 public:
  InputSchedule() = default;
  /// Uniform switching every `interval` seconds from t0.
  InputSchedule(double t0, double interval, std::vector<Vec> values);
  /// Arbitrary strictly increasing switching times.
  InputSchedule(std::vector<double> starts, std::vector<Vec> values);
  /// A single value for all t.
  static InputSchedule constant(Vec value);

  Vec operator()(double t) const;
  int index(double t) const;
  int size() const { return static_cast<int>(values_.size()); }
  bool empty() const { return values_.empty(); }
  /// Switching times strictly inside (a, b).
  std::vector<double> breakpoints(double a, double b) const;

 private:
  std::vector<double> starts_;
  std::vector<Vec> values_;
};

/// Original DDE by the method of steps with implicit Euler. Delayed values come
/// from the committed dense history (piecewise linear) and are frozen during a
/// step, which requires h <= tau_i(u) / 2 for every delay.
Trajectory simulate_dde(const DdeModel& model, const HistoryFunction& history, const InputSchedule& inputs,
                        const InputSchedule& disturbances, double t0, double tf, const SimOptions& options = {});

/// Delay-linearized system: each step solves the transcription residual for
/// the next state by Newton's method. Only x(t0) is needed.
Trajectory simulate_linearized(const DdeModel& model, const VecRef& x0, const InputSchedule& inputs,
                               const InputSchedule& disturbances, double t0, double tf,
                               const SimOptions& options = {});

}  // namespace ddenoc
