#pragma once

#include "ddenoc/common.hpp"

#include <vector>

namespace ddenoc {

/// Initial state function x_0(t) on [t_0 - tau_max, t_0]: either a constant
/// vector (valid for every t) or stored samples with linear interpolation.
class HistoryFunction {
 public:
  static HistoryFunction constant(Vec x);
  /// `times` strictly increasing, one state per time.
  static HistoryFunction piecewise_linear(std::vector<double> times, std::vector<Vec> states);

  bool is_constant() const { return times_.empty(); }
  int dim() const { return static_cast<int>(constant_.size()); }
  double span_begin() const;
  double span_end() const;
  bool covers(double t) const;

  /// Throws DomainError outside the span.
  Vec operator()(double t) const;

 private:
  Vec constant_;
  std::vector<double> times_;
  std::vector<Vec> states_;
};

/// Linear interpolation of (times, values) at t; times strictly increasing and
/// t inside [times.front(), times.back()].
Vec interpolate_linear(const std::vector<double>& times, const std::vector<Vec>& values, double t);

}  // namespace ddenoc
