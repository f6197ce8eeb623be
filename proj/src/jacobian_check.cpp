#include "ddenoc/jacobian_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ddenoc {

std::vector<std::string> JacobianReport::failing_blocks() const {
  std::vector<std::string> out;
  for (const auto& b : blocks) {
    if (!(b.max_rel_error <= tol)) out.push_back(b.block);
  }
  return out;
}

std::string JacobianReport::summary() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " (tol " << tol << ")";
  for (const auto& b : blocks) {
    os << "\n  " << b.block << ": " << b.max_rel_error << " at point " << b.worst_point;
  }
  return os.str();
}

namespace {

double fd_step(double w) { return 1e-3 * std::max(1.0, std::abs(w)); }

}  // namespace

Mat central_difference_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& at) {
  const Vec f0 = fn(at);
  Mat jac(f0.size(), at.size());
  Vec w = at;
  const auto eval = [&](Eigen::Index j, double offset) {
    w[j] = at[j] + offset;
    Vec f = fn(w);
    w[j] = at[j];
    return f;
  };
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    const double h = fd_step(at[j]);
    jac.col(j) = (8.0 * (eval(j, h) - eval(j, -h)) - (eval(j, 2.0 * h) - eval(j, -2.0 * h))) / (12.0 * h);
  }
  return jac;
}

Vec central_difference_gradient(const std::function<double(const Vec&)>& fn, const Vec& at) {
  Vec g(at.size());
  Vec w = at;
  const auto eval = [&](Eigen::Index j, double offset) {
    w[j] = at[j] + offset;
    const double f = fn(w);
    w[j] = at[j];
    return f;
  };
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    const double h = fd_step(at[j]);
    g[j] = (8.0 * (eval(j, h) - eval(j, -h)) - (eval(j, 2.0 * h) - eval(j, -2.0 * h))) / (12.0 * h);
  }
  return g;
}


double relative_matrix_error(const Mat& analytic, const Mat& reference) {
  if (analytic.rows() != reference.rows() || analytic.cols() != reference.cols()) {
    return std::numeric_limits<double>::infinity();
  }
  if (analytic.size() == 0) return 0.0;
  return relative_matrix_error(analytic, reference,
                               analytic.cwiseAbs().cwiseMax(reference.cwiseAbs()).rowwise().maxCoeff());
}

double relative_matrix_error(const Mat& analytic, const Mat& reference, const Vec& row_floor) {
  if (analytic.rows() != reference.rows() || analytic.cols() != reference.cols() || row_floor.size() != analytic.rows()) {
    return std::numeric_limits<double>::infinity();
  }
  if (analytic.size() == 0) return 0.0;
  const Mat both = analytic.cwiseAbs().cwiseMax(reference.cwiseAbs());
  const RowVec col_max = both.colwise().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      const double diff = std::abs(analytic(i, j) - reference(i, j));
      if (diff == 0.0) continue;
      const double denom = std::max({std::abs(reference(i, j)), 1e-6 * row_floor[i], 1e-6 * col_max[j]});
      worst = std::max(worst, denom > 0.0 ? diff / denom : std::numeric_limits<double>::infinity());
    }
  }
  return std::isnan(worst) ? std::numeric_limits<double>::infinity() : worst;
}

namespace {

void require_finite(const Vec& v, const SamplePoint& p, int index, const char* what) {
  if (v.allFinite()) return;
  std::ostringstream msg;
  Eigen::IOFormat fmt(Eigen::StreamPrecision, Eigen::DontAlignCols, ", ", ", ", "", "", "[", "]");
  msg << "non-finite " << what << " at sample point " << index << ": x = " << p.x.format(fmt)
      << ", z = " << p.z.format(fmt) << ", u = " << p.u.format(fmt);
  throw EvaluationError(msg.str());
}

void record(std::vector<BlockError>& blocks, const std::string& name, double err, int point) {
  auto it = std::find_if(blocks.begin(), blocks.end(), [&](const BlockError& b) { return b.block == name; });
  if (it == blocks.end()) {
    blocks.push_back({name, err, point});
  } else if (err > it->max_rel_error || std::isnan(err)) {
    it->max_rel_error = err;
    it->worst_point = point;
  }
}

}  // namespace

JacobianReport validate_jacobians(const DdeModel& model, const std::vector<SamplePoint>& points,
                                  double tol) {
  JacobianReport report;
  report.tol = tol;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const SamplePoint& p = points[k];
    const int idx = static_cast<int>(k);
    require_finite(model.rhs(p.x, p.z, p.u, p.d), p, idx, "right-hand side");
    const RhsJacobians jac = model.rhs_jacobians(p.x, p.z, p.u, p.d);
    require_finite(Eigen::Map<const Vec>(jac.fx.data(), jac.fx.size()), p, idx, "df/dx");

    const Mat fd_x = central_difference_jacobian([&](const Vec& x) { return model.rhs(x, p.z, p.u, p.d); }, p.x);
    const Mat fd_z = central_difference_jacobian([&](const Vec& z) { return model.rhs(p.x, z, p.u, p.d); }, p.z);
    const Mat fd_u = central_difference_jacobian([&](const Vec& u) { return model.rhs(p.x, p.z, u, p.d); }, p.u);
    // Entries are compared as sensitivities to relative perturbations
    // (column j weighted by max(1, |w_j|)), with the row floor taken over the
    // whole derivative of f_i. A negligible entry in a sparse block row is
    // then judged against the terms it is added to.
    const auto weights = [](const Vec& w) { return Vec(w.cwiseAbs().cwiseMax(1.0)); };
    const Vec wx = weights(p.x), wz = weights(p.z), wu = weights(p.u);
    const Mat ax = jac.fx * wx.asDiagonal(), az = jac.fz * wz.asDiagonal(), au = jac.fu * wu.asDiagonal();
    const Mat rx = fd_x * wx.asDiagonal(), rz = fd_z * wz.asDiagonal(), ru = fd_u * wu.asDiagonal();
    Vec row_max = Vec::Zero(jac.fx.rows());
    for (const Mat* m : {&ax, &az, &au, &rx, &rz, &ru}) {
      if (m->cols() > 0) row_max = row_max.cwiseMax(m->cwiseAbs().rowwise().maxCoeff());
    }
    record(report.blocks, "df/dx", relative_matrix_error(ax, rx, row_max), idx);
    record(report.blocks, "df/dz", relative_matrix_error(az, rz, row_max), idx);
    record(report.blocks, "df/du", relative_matrix_error(au, ru, row_max), idx);

    for (int i = 0; i < model.num_delays(); ++i) {
      const std::string tag = std::to_string(i + 1);
      const Vec r = model.delayed_map(i, p.x);
      require_finite(r, p, idx, "delayed map");
      const Mat fd_h = central_difference_jacobian([&](const Vec& x) { return model.delayed_map(i, x); }, p.x);
      record(report.blocks, "dh" + tag + "/dx", relative_matrix_error(model.delayed_map_jacobian(i, p.x), fd_h), idx);

      const Mat fd_tau = central_difference_jacobian(
          [&](const Vec& u) { return Vec::Constant(1, model.delay(i, u)); }, p.u);
      const Mat tau_jac = model.delay_jacobian(i, p.u);
      record(report.blocks, "dtau" + tag + "/du", relative_matrix_error(tau_jac, fd_tau), idx);
    }
  }
  for (const auto& b : report.blocks) {
    if (!(b.max_rel_error <= tol)) report.pass = false;
  }
  return report;
}

}  // namespace ddenoc
