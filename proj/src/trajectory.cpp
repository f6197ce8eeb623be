#include "ddenoc/trajectory.hpp"

#include "ddenoc/history.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ddenoc {

std::vector<std::string> Trajectory::column_names() const {
  std::vector<std::string> names = state_names;
  names.insert(names.end(), input_names.begin(), input_names.end());
  names.insert(names.end(), output_names.begin(), output_names.end());
  return names;
}

bool Trajectory::has_column(const std::string& name) const {
  const auto names = column_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

int index_of(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

Vec Trajectory::column(const std::string& name) const {
  if (int j = index_of(state_names, name); j >= 0) return states.col(j);
  if (int j = index_of(input_names, name); j >= 0) return inputs.col(j);
  if (int j = index_of(output_names, name); j >= 0) return outputs.col(j);
  std::ostringstream msg;
  msg << "unknown output '" << name << "'; available:";
  for (const auto& n : column_names()) msg << ' ' << n;
  throw ConfigError(msg.str());
}

void Trajectory::validate() const {
  const auto n = static_cast<Eigen::Index>(times.size());
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (!(times[j] > times[j - 1])) throw ConfigError("trajectory times must be strictly increasing");
  }
  auto check = [&](const Mat& table, const std::vector<std::string>& names, const char* what) {
    if (table.cols() != static_cast<Eigen::Index>(names.size()) || (table.cols() > 0 && table.rows() != n)) {
      throw ConfigError(std::string("trajectory ") + what + " table does not match times/names");
    }
  };
  check(states, state_names, "state");
  check(inputs, input_names, "input");
  check(outputs, output_names, "output");
}

ErrorSeries compare_trajectories(const Trajectory& a, const Trajectory& b,
                                 const std::string& output) {
  const Vec col_a = a.column(output);
  const Vec col_b = b.column(output);
  if (a.times.empty() || b.times.empty()) throw ConfigError("cannot compare empty trajectories");

  const double begin = std::max(a.times.front(), b.times.front());
  const double end = std::min(a.times.back(), b.times.back());
  if (begin > end) throw ConfigError("trajectories do not overlap in time");

  auto count_in = [&](const std::vector<double>& t) {
    return std::count_if(t.begin(), t.end(), [&](double s) { return s >= begin && s <= end; });
  };
  const auto& grid = count_in(a.times) <= count_in(b.times) ? a.times : b.times;

  auto as_samples = [](const Vec& col) {
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(col.size()));
    for (Eigen::Index j = 0; j < col.size(); ++j) out.push_back(Vec::Constant(1, col[j]));
    return out;
  };
  const auto samples_a = as_samples(col_a);
  const auto samples_b = as_samples(col_b);

  ErrorSeries series;
  series.output = output;
  for (double t : grid) {
    if (t >= begin && t <= end) series.times.push_back(t);
  }
  series.difference.resize(static_cast<Eigen::Index>(series.times.size()));
  for (std::size_t j = 0; j < series.times.size(); ++j) {
    const double t = series.times[j];
    series.difference[static_cast<Eigen::Index>(j)] =
        interpolate_linear(a.times, samples_a, t)[0] - interpolate_linear(b.times, samples_b, t)[0];
  }
  if (series.difference.size() > 0) {
    series.inf_norm = series.difference.cwiseAbs().maxCoeff();
    series.two_norm = series.difference.norm();
  }
  return series;
}

}  // namespace ddenoc
