#include "ddenoc/linear_model.hpp"

namespace ddenoc {

LinearDelayModel::LinearDelayModel(Mat a, Mat b, Mat e, std::vector<Delay> delays)
    : a_(std::move(a)), b_(std::move(b)), e_(std::move(e)), delays_(std::move(delays)) {
  const auto n = a_.rows();
  if (a_.cols() != n) throw ConfigError("A must be square");
  if (e_.rows() != n && e_.size() != 0) throw ConfigError("E must have n_x rows");
  if (e_.size() == 0) e_.resize(n, 0);
  Eigen::Index nz = 0;
  for (auto& d : delays_) {
    if (d.selector.cols() != n) throw ConfigError("delay selector must have n_x columns");
    if (d.input_gain.size() == 0) d.input_gain = RowVec::Zero(e_.cols());
    if (d.input_gain.size() != e_.cols()) throw ConfigError("delay input gain must have n_u entries");
    nz += d.selector.rows();
  }
  if (b_.rows() != n || b_.cols() != nz) throw ConfigError("B must be n_x x n_z");
}

LinearDelayModel LinearDelayModel::scalar(double a, double b, double tau) {
  return LinearDelayModel(Mat::Constant(1, 1, a), Mat::Constant(1, 1, b), Mat(1, 0),
                          {Delay{Mat::Identity(1, 1), tau, RowVec()}});
}

double LinearDelayModel::delay(int i, const VecRef& u) const {
  const auto& d = delays_[static_cast<std::size_t>(i)];
  return d.base + (u.size() > 0 ? d.input_gain.dot(u) : 0.0);
}

RowVec LinearDelayModel::delay_jacobian(int i, const VecRef&) const {
  return delays_[static_cast<std::size_t>(i)].input_gain;
}

Vec LinearDelayModel::rhs(const VecRef& x, const VecRef& z, const VecRef& u, const VecRef&) const {
  Vec out = a_ * x + b_ * z;
  if (e_.cols() > 0) out += e_ * u;
  return out;
}

RhsJacobians LinearDelayModel::rhs_jacobians(const VecRef&, const VecRef&, const VecRef&,
                                             const VecRef&) const {
  return {a_, b_, e_};
}

Vec LinearDelayModel::delayed_map(int i, const VecRef& x) const {
  return delays_[static_cast<std::size_t>(i)].selector * x;
}

Mat LinearDelayModel::delayed_map_jacobian(int i, const VecRef&) const {
  return delays_[static_cast<std::size_t>(i)].selector;
}

}  // namespace ddenoc
