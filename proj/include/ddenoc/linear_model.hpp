#pragma once

#include "ddenoc/dde_model.hpp"

#include <vector>

namespace ddenoc {

/// Linear DDE x' = A x + B z + E u with h_i(x) = H_i x and affine delays
/// tau_i(u) = tau0_i + g_i^T u. Used as a test model and as the reference for
/// closed-form checks.
class LinearDelayModel : public DdeModel {
 public:
  struct Delay {
    Mat selector;          ///< H_i, dim(r_i) x n_x
    double base = 0.0;     ///< tau0_i
    RowVec input_gain;     ///< g_i^T, may be empty for constant delays
  };

  LinearDelayModel(Mat a, Mat b, Mat e, std::vector<Delay> delays);

  /// x' = a x + b x(t - tau), scalar, constant delay.
  static LinearDelayModel scalar(double a, double b, double tau);

  int nx() const override { return static_cast<int>(a_.rows()); }
  int nu() const override { return static_cast<int>(e_.cols()); }
  int num_delays() const override { return static_cast<int>(delays_.size()); }
  int delayed_dim(int i) const override { return static_cast<int>(delays_[i].selector.rows()); }

  double delay(int i, const VecRef& u) const override;
  RowVec delay_jacobian(int i, const VecRef& u) const override;

  Vec rhs(const VecRef& x, const VecRef& z, const VecRef& u, const VecRef& d) const override;
  RhsJacobians rhs_jacobians(const VecRef& x, const VecRef& z, const VecRef& u,
                             const VecRef& d) const override;

  Vec delayed_map(int i, const VecRef& x) const override;
  Mat delayed_map_jacobian(int i, const VecRef& x) const override;

  const Mat& a() const { return a_; }
  const Mat& b() const { return b_; }

 private:
  Mat a_, b_, e_;
  std::vector<Delay> delays_;
};

}  // namespace ddenoc
