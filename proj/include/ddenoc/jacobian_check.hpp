#pragma once

#include "ddenoc/dde_model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ddenoc {

/// One evaluation point (x, z, u, d) for derivative checks.
struct SamplePoint {
  Vec x;
  Vec z;
  Vec u;
  Vec d;
};

struct BlockError {
  std::string block;     ///< e.g. "df/dx", "dh2/dx", "dtau1/du"
  double max_rel_error;  ///< worst entry over all sample points
  int worst_point;
};

struct JacobianReport {
  std::vector<BlockError> blocks;
  double tol = 0.0;
  bool pass = true;

  /// Blocks whose error exceeds tol.
  std::vector<std::string> failing_blocks() const;
  std::string summary() const;
};

/// Five-point central difference Jacobian of fn at `at`, step 1e-3 * max(1, |w_j|).
Mat central_difference_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& at);

/// Central difference gradient of a scalar function, same step rule.
Vec central_difference_gradient(const std::function<double(const Vec&)>& fn, const Vec& at);

/// Entry-wise relative error |A - F| / max(|F_ij|, 1e-6 max|row i|, 1e-6 max|col j|).
/// Entries that are zero in both matrices contribute nothing.
double relative_matrix_error(const Mat& analytic, const Mat& reference);
/// Same metric with the row floor 1e-6 row_floor[i] supplied by the caller.
double relative_matrix_error(const Mat& analytic, const Mat& reference, const Vec& row_floor);

/// Compares every analytic derivative of the model (df/dx, df/dz, df/du,
/// dh_i/dx, dtau_i/du) with central differences at each sample point. The f
/// blocks are compared column-weighted by max(1, |argument|), with the row
/// floor taken over the whole weighted derivative of f_i.
/// Throws EvaluationError, echoing the point, if the model returns a
/// non-finite value.
JacobianReport validate_jacobians(const DdeModel& model, const std::vector<SamplePoint>& points,
                                  double tol = 1e-6);

}  // namespace ddenoc
