#pragma once

#include "ddenoc/common.hpp"

#include <string>
#include <vector>

namespace ddenoc {

/// Sampled trajectory: one row per time point in each of the state, input and
/// output tables. Inputs hold the zero-order-hold value active at each time
/// (the last interval's value at the final time).
struct Trajectory {
  std::vector<double> times;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  Mat states;   ///< size() x state_names.size()
  Mat inputs;   ///< size() x input_names.size()
  Mat outputs;  ///< size() x output_names.size()

  int size() const { return static_cast<int>(times.size()); }
  std::vector<std::string> column_names() const;
  bool has_column(const std::string& name) const;
  /// Column by name across states, inputs and outputs; throws ConfigError
  /// listing the available names when absent.
  Vec column(const std::string& name) const;
  /// Throws ConfigError when times are not strictly increasing or the tables
  /// disagree in length.
  void validate() const;
};

/// Pointwise difference of one named quantity between two trajectories.
struct ErrorSeries {
  std::string output;
  std::vector<double> times;
  Vec difference;  ///< a - b on `times`
  double inf_norm = 0.0;
  double two_norm = 0.0;
};

/// Resamples both trajectories onto the coarser grid restricted to the common
/// span (piecewise linear) and returns a - b for the named quantity.
ErrorSeries compare_trajectories(const Trajectory& a, const Trajectory& b,
                                 const std::string& output);

}  // namespace ddenoc
