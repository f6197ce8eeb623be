#include "ddenoc/dde_model.hpp"

#include "ddenoc/history.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ddenoc {

int DdeModel::nz() const {
  int total = 0;
  for (int i = 0; i < num_delays(); ++i) total += delayed_dim(i);
  return total;
}

int DdeModel::z_offset(int i) const {
  int offset = 0;
  for (int j = 0; j < i; ++j) offset += delayed_dim(j);
  return offset;
}

double DdeModel::max_delay(int i, const VecRef& u_min, const VecRef& u_max) const {
  // Generic fallback: box vertices plus a tensor grid, followed by projected
  // gradient ascent from the best sample.
  const int n = nu();
  if (n == 0) return delay(i, Vec());
  constexpr int kPerAxis = 9;
  const int per_axis = n <= 4 ? kPerAxis : 3;
  long total = 1;
  for (int k = 0; k < n; ++k) total *= per_axis;

  Vec best_u = u_min;
  double best = -std::numeric_limits<double>::infinity();
  Vec u(n);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int k = 0; k < n; ++k) {
      const int j = static_cast<int>(rem % per_axis);
      rem /= per_axis;
      u[k] = u_min[k] + (u_max[k] - u_min[k]) * j / (per_axis - 1);
    }
    const double value = delay(i, u);
    if (value > best) {
      best = value;
      best_u = u;
    }
  }

  double step = (u_max - u_min).cwiseAbs().maxCoeff() / (per_axis - 1);
  for (int it = 0; it < 200 && step > 1e-12; ++it) {
    const RowVec g = delay_jacobian(i, best_u);
    if (g.norm() == 0.0) break;
    Vec trial = best_u + step * g.transpose() / g.norm();
    trial = trial.cwiseMax(u_min).cwiseMin(u_max);
    const double value = delay(i, trial);
    if (value > best) {
      best = value;
      best_u = trial;
    } else {
      step *= 0.5;
    }
  }
  return best;
}

std::vector<std::string> DdeModel::state_names() const {
  std::vector<std::string> names;
  for (int i = 0; i < nx(); ++i) names.push_back("x" + std::to_string(i + 1));
  return names;
}

std::vector<std::string> DdeModel::input_names() const {
  std::vector<std::string> names;
  for (int i = 0; i < nu(); ++i) names.push_back("u" + std::to_string(i + 1));
  return names;
}

Vec DdeModel::outputs(const VecRef&, const VecRef&) const { return Vec(0); }

Vec stacked_delayed_maps(const DdeModel& model, const VecRef& x) {
  Vec z(model.nz());
  for (int i = 0; i < model.num_delays(); ++i) {
    z.segment(model.z_offset(i), model.delayed_dim(i)) = model.delayed_map(i, x);
  }
  return z;
}

double tau_max(const DdeModel& model, const VecRef& u_min, const VecRef& u_max) {
  double result = 0.0;
  for (int i = 0; i < model.num_delays(); ++i) {
    result = std::max(result, model.max_delay(i, u_min, u_max));
  }
  return result;
}

Vec eval_memory_state(const DdeModel& model, const HistoryFunction& history, double t,
                      const VecRef& u) {
  Vec z(model.nz());
  for (int i = 0; i < model.num_delays(); ++i) {
    const double delayed_time = t - model.delay(i, u);
    if (!history.covers(delayed_time)) {
      std::ostringstream msg;
      msg << "history underflow: delay " << i << " requests t = " << delayed_time
          << " outside [" << history.span_begin() << ", " << history.span_end() << "]";
      throw HistoryUnderflow(i, delayed_time, msg.str());
    }
    z.segment(model.z_offset(i), model.delayed_dim(i)) =
        model.delayed_map(i, history(delayed_time));
  }
  return z;
}

}  // namespace ddenoc
