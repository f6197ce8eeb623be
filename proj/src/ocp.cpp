#include "ddenoc/ocp.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace ddenoc {

Mat StageCost::hess_xx(const VecRef& x, const VecRef&, const VecRef&) const {
  return Mat::Zero(x.size(), x.size());
}

TrackingCost::TrackingCost(Vec c, int setpoint_index, double weight)
    : c_(std::move(c)), index_(setpoint_index), weight_(weight) {
  if (index_ < 0) throw ConfigError("tracking cost: negative setpoint index");
  if (!(weight_ >= 0.0)) throw ConfigError("tracking cost: weight must be >= 0");
}

double TrackingCost::value(const VecRef& x, const VecRef&, const VecRef& d) const {
  if (d.size() <= index_) throw ConfigError("tracking cost: disturbance vector lacks the setpoint entry");
  const double e = c_.dot(x) - d[index_];
  return 0.5 * weight_ * e * e;
}

Vec TrackingCost::grad_x(const VecRef& x, const VecRef&, const VecRef& d) const {
  if (d.size() <= index_) throw ConfigError("tracking cost: disturbance vector lacks the setpoint entry");
  return weight_ * (c_.dot(x) - d[index_]) * c_;
}

Vec TrackingCost::grad_u(const VecRef&, const VecRef& u, const VecRef&) const {
  return Vec::Zero(u.size());
}

Mat TrackingCost::hess_xx(const VecRef&, const VecRef&, const VecRef&) const {
  return weight_ * c_ * c_.transpose();
}

const Mat& OcpSpec::weight(int k) const {
  return rate_weights.size() == 1 ? rate_weights.front() : rate_weights.at(static_cast<std::size_t>(k));
}

Vec OcpSpec::disturbance(int k) const {
  if (disturbances.empty()) return Vec();
  return disturbances.size() == 1 ? disturbances.front() : disturbances.at(static_cast<std::size_t>(k));
}

void OcpSpec::validate(const DdeModel& model) const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw ConfigError("ocp." + field + ": " + what);
  };
  const int nx = model.nx();
  const int nu = model.nu();
  if (!(std::isfinite(t0) && std::isfinite(tf) && tf > t0)) fail("tf", "need finite t0 < tf");
  if (intervals < 1) fail("intervals", "need at least one interval");
  if (!stage_cost) fail("stage_cost", "missing");
  if (rate_weights.size() != 1 && rate_weights.size() != static_cast<std::size_t>(intervals)) {
    fail("rate_weights", "give one matrix or one per interval");
  }
  for (const Mat& w : rate_weights) {
    if (w.rows() != nu || w.cols() != nu) fail("rate_weights", "must be nu x nu");
    if (!w.isApprox(w.transpose(), 1e-12)) fail("rate_weights", "must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Mat> es(w, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) fail("rate_weights", "must be positive definite");
  }
  if (x_min.size() != nx || x_max.size() != nx) fail("x_min", "state bounds must have nx entries");
  if (u_min.size() != nu || u_max.size() != nu || u_ref.size() != nu) fail("u_min", "input bounds and u_ref must have nu entries");
  for (int i = 0; i < nx; ++i) {
    if (!(x_min[i] < x_max[i])) fail("x_min", "need x_min < x_max for state " + std::to_string(i));
  }
  for (int i = 0; i < nu; ++i) {
    if (!(std::isfinite(u_min[i]) && std::isfinite(u_max[i]) && u_min[i] <= u_max[i])) {
      fail("u_min", "need finite u_min <= u_max for input " + std::to_string(i));
    }
    if (!(u_ref[i] >= u_min[i] && u_ref[i] <= u_max[i])) fail("u_ref", "must lie inside the input box");
  }
  if (!disturbances.empty() && disturbances.size() != 1 && disturbances.size() != static_cast<std::size_t>(intervals)) {
    fail("disturbances", "give one vector or one per interval");
  }
  for (const Vec& d : disturbances) {
    if (d.size() < model.nd()) fail("disturbances", "shorter than the model's nd");
  }
  if (history.dim() != nx) fail("history", "dimension differs from nx");
  const double tmax = tau_max(model, u_min, u_max);
  if (!history.covers(t0) || !history.covers(t0 - tmax)) {
    std::ostringstream msg;
    msg << "must cover [t0 - tau_max, t0] = [" << t0 - tmax << ", " << t0 << "]";
    fail("history", msg.str());
  }
}

OcpSpec make_ocp(const DdeModel& model, double t0, double tf, int intervals, HistoryFunction history) {
  OcpSpec ocp;
  ocp.t0 = t0;
  ocp.tf = tf;
  ocp.intervals = intervals;
  ocp.rate_weights = {Mat::Identity(model.nu(), model.nu())};
  ocp.x_min = Vec::Constant(model.nx(), -std::numeric_limits<double>::infinity());
  ocp.x_max = Vec::Constant(model.nx(), std::numeric_limits<double>::infinity());
  ocp.u_min = Vec::Constant(model.nu(), -1.0);
  ocp.u_max = Vec::Constant(model.nu(), 1.0);
  ocp.u_ref = Vec::Zero(model.nu());
  ocp.history = std::move(history);
  return ocp;
}

}  // namespace ddenoc
