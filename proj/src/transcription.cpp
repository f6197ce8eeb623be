#include "ddenoc/transcription.hpp"

#include <sstream>

namespace ddenoc {

Vec linearized_delayed_state(const VecRef& x_prev, const VecRef& x_next, double dt, double tau) {
  return x_next - (x_next - x_prev) / dt * tau;
}

StepEvaluation evaluate_step(const DdeModel& model, const VecRef& x_prev, const VecRef& x_next,
                             const VecRef& u, const VecRef& d, double dt, bool with_jacobians) {
  const int nx = model.nx();
  const int m = model.num_delays();
  Vec z(model.nz());
  std::vector<double> tau(static_cast<std::size_t>(m));
  std::vector<Vec> v(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    tau[static_cast<std::size_t>(i)] = model.delay(i, u);
    v[static_cast<std::size_t>(i)] = linearized_delayed_state(x_prev, x_next, dt, tau[static_cast<std::size_t>(i)]);
    z.segment(model.z_offset(i), model.delayed_dim(i)) = model.delayed_map(i, v[static_cast<std::size_t>(i)]);
  }
  StepEvaluation out;
  out.residual = x_next - x_prev - model.rhs(x_next, z, u, d) * dt;
  if (!with_jacobians) return out;

  const RhsJacobians jac = model.rhs_jacobians(x_next, z, u, d);
  const Mat eye = Mat::Identity(nx, nx);
  Mat coupled_next = jac.fx;
  Mat coupled_prev = Mat::Zero(nx, nx);
  Mat coupled_u = jac.fu;
  const Vec slope = (x_next - x_prev) / dt;
  for (int i = 0; i < m; ++i) {
    const auto ti = tau[static_cast<std::size_t>(i)];
    const Mat g = jac.fz.middleCols(model.z_offset(i), model.delayed_dim(i)) *
                  model.delayed_map_jacobian(i, v[static_cast<std::size_t>(i)]);
    coupled_next += g * (1.0 - ti / dt);
    coupled_prev += g * (ti / dt);
    coupled_u -= (g * slope) * model.delay_jacobian(i, u);
  }
  out.d_next = eye - coupled_next * dt;
  out.d_prev = -eye - coupled_prev * dt;
  out.d_u = -coupled_u * dt;
  return out;
}

TranscribedNlp::TranscribedNlp(std::shared_ptr<const DdeModel> model, OcpSpec ocp, int steps_per_interval)
    : model_(std::move(model)), ocp_(std::move(ocp)), m_(steps_per_interval) {
  if (!model_) throw ConfigError("transcription: null model");
  if (m_ < 1) throw ConfigError("transcription: steps per interval must be >= 1");
  ocp_.validate(*model_);
  x0_ = ocp_.history(ocp_.t0);
}

int TranscribedNlp::num_variables() const {
  return ocp_.intervals * (m_ * model_->nx() + model_->nu());
}

int TranscribedNlp::num_constraints() const { return ocp_.intervals * m_ * model_->nx(); }

int TranscribedNlp::state_offset(int k, int n) const {
  return k * (m_ * model_->nx() + model_->nu()) + (n - 1) * model_->nx();
}

int TranscribedNlp::input_offset(int k) const {
  return k * (m_ * model_->nx() + model_->nu()) + m_ * model_->nx();
}

int TranscribedNlp::residual_offset(int k, int n) const { return (k * m_ + (n - 1)) * model_->nx(); }

void TranscribedNlp::check_size(const Vec& w) const {
  if (w.size() != num_variables()) {
    std::ostringstream msg;
    msg << "decision vector has " << w.size() << " entries, layout expects " << num_variables();
    throw ConfigError(msg.str());
  }
}

Vec TranscribedNlp::state(const Vec& w, int k, int n) const {
  if (n == 0) return k == 0 ? x0_ : Vec(w.segment(state_offset(k - 1, m_), model_->nx()));
  return w.segment(state_offset(k, n), model_->nx());
}

Vec TranscribedNlp::input(const Vec& w, int k) const { return w.segment(input_offset(k), model_->nu()); }

Vec TranscribedNlp::pack(const std::vector<Vec>& states, const std::vector<Vec>& inputs) const {
  const int n_int = ocp_.intervals;
  if (states.size() != static_cast<std::size_t>(n_int * m_) || inputs.size() != static_cast<std::size_t>(n_int)) {
    throw ConfigError("pack: need N*M states and N inputs");
  }
  Vec w(num_variables());
  for (int k = 0; k < n_int; ++k) {
    for (int n = 1; n <= m_; ++n) {
      const Vec& x = states[static_cast<std::size_t>(k * m_ + n - 1)];
      if (x.size() != model_->nx()) throw ConfigError("pack: state has the wrong length");
      w.segment(state_offset(k, n), model_->nx()) = x;
    }
    const Vec& u = inputs[static_cast<std::size_t>(k)];
    if (u.size() != model_->nu()) throw ConfigError("pack: input has the wrong length");
    w.segment(input_offset(k), model_->nu()) = u;
  }
  return w;
}

Vec TranscribedNlp::pack(const Trajectory& trajectory) const {
  const int steps = ocp_.intervals * m_;
  if (trajectory.size() != steps + 1 || trajectory.states.cols() != model_->nx() ||
      trajectory.inputs.cols() != model_->nu()) {
    throw ConfigError("pack: trajectory does not match the transcription grid");
  }
  std::vector<Vec> states;
  std::vector<Vec> inputs;
  for (int j = 1; j <= steps; ++j) states.push_back(trajectory.states.row(j).transpose());
  for (int k = 0; k < ocp_.intervals; ++k) inputs.push_back(trajectory.inputs.row(k * m_).transpose());
  return pack(states, inputs);
}

Trajectory TranscribedNlp::extract_trajectory(const Vec& w) const {
  check_size(w);
  const int steps = ocp_.intervals * m_;
  Trajectory tr;
  tr.state_names = model_->state_names();
  tr.input_names = model_->input_names();
  tr.output_names = model_->output_names();
  tr.states.resize(steps + 1, model_->nx());
  tr.inputs.resize(steps + 1, model_->nu());
  tr.outputs.resize(steps + 1, static_cast<Eigen::Index>(tr.output_names.size()));
  const double h = step_size();
  for (int j = 0; j <= steps; ++j) {
    const int k = j == steps ? ocp_.intervals - 1 : j / m_;
    const int n = j == steps ? m_ : j % m_;
    const Vec x = state(w, k, n);
    const Vec u = input(w, std::min(j / m_, ocp_.intervals - 1));
    tr.times.push_back(ocp_.t0 + j * h);
    tr.states.row(j) = x.transpose();
    tr.inputs.row(j) = u.transpose();
    if (!tr.output_names.empty()) tr.outputs.row(j) = model_->outputs(x, u).transpose();
  }
  tr.times.back() = ocp_.tf;
  return tr;
}

double TranscribedNlp::objective(const Vec& w) const {
  check_size(w);
  const double h = step_size();
  const double big_dt = ocp_.dt();
  double psi = 0.0;
  Vec u_prev = ocp_.u_ref;
  for (int k = 0; k < ocp_.intervals; ++k) {
    const Vec u = input(w, k);
    const Vec d = ocp_.disturbance(k);
    for (int n = 1; n <= m_; ++n) psi += ocp_.stage_cost->value(state(w, k, n), u, d) * h;
    const Vec du = u - u_prev;
    psi += 0.5 * du.dot(ocp_.weight(k) * du) / big_dt;
    u_prev = u;
  }
  return psi;
}

Vec TranscribedNlp::gradient(const Vec& w) const {
  check_size(w);
  const double h = step_size();
  const double big_dt = ocp_.dt();
  Vec g = Vec::Zero(num_variables());
  const int nu = model_->nu();
  for (int k = 0; k < ocp_.intervals; ++k) {
    const Vec u = input(w, k);
    const Vec d = ocp_.disturbance(k);
    Vec gu = Vec::Zero(nu);
    for (int n = 1; n <= m_; ++n) {
      const Vec x = state(w, k, n);
      g.segment(state_offset(k, n), model_->nx()) += ocp_.stage_cost->grad_x(x, u, d) * h;
      gu += ocp_.stage_cost->grad_u(x, u, d) * h;
    }
    const Vec du = u - (k == 0 ? ocp_.u_ref : input(w, k - 1));
    gu += ocp_.weight(k) * du / big_dt;
    if (k + 1 < ocp_.intervals) {
      const Vec du_next = input(w, k + 1) - u;
      gu -= ocp_.weight(k + 1) * du_next / big_dt;
    }
    g.segment(input_offset(k), nu) += gu;
  }
  return g;
}

Vec TranscribedNlp::constraints(const Vec& w) const {
  check_size(w);
  const double h = step_size();
  Vec r(num_constraints());
  for (int k = 0; k < ocp_.intervals; ++k) {
    const Vec u = input(w, k);
    const Vec d = ocp_.disturbance(k);
    for (int n = 1; n <= m_; ++n) {
      r.segment(residual_offset(k, n), model_->nx()) =
          evaluate_step(*model_, state(w, k, n - 1), state(w, k, n), u, d, h, false).residual;
    }
  }
  return r;
}

Vec TranscribedNlp::restore_states(const Vec& w, double tol, int max_iter) const {
  check_size(w);
  const double h = step_size();
  const int nx = model_->nx();
  Vec out = w;
  for (int k = 0; k < ocp_.intervals; ++k) {
    const Vec u = input(out, k);
    const Vec d = ocp_.disturbance(k);
    for (int n = 1; n <= m_; ++n) {
      const Vec prev = state(out, k, n - 1);
      auto x = out.segment(state_offset(k, n), nx);
      bool done = false;
      for (int it = 0; it <= max_iter && !done; ++it) {
        const StepEvaluation ev = evaluate_step(*model_, prev, x, u, d, h, true);
        if (!ev.residual.allFinite()) break;
        done = (ev.residual.array().abs() <= tol * x.array().abs().max(1.0)).all();
        if (!done && it < max_iter) x -= ev.d_next.partialPivLu().solve(ev.residual);
      }
      if (!done) {
        throw StepFailure(ocp_.t0 + (k * m_ + n) * h, "state restoration did not converge");
      }
    }
  }
  return out;
}

SpMat TranscribedNlp::jacobian(const Vec& w) const {
  check_size(w);
  const double h = step_size();
  const int nx = model_->nx();
  const int nu = model_->nu();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(ocp_.intervals * m_ * nx * (2 * nx + nu)));
  auto put = [&](int row0, int col0, const Mat& block) {
    for (int c = 0; c < block.cols(); ++c) {
      for (int r = 0; r < block.rows(); ++r) trips.emplace_back(row0 + r, col0 + c, block(r, c));
    }
  };
  for (int k = 0; k < ocp_.intervals; ++k) {
    const Vec u = input(w, k);
    const Vec d = ocp_.disturbance(k);
    for (int n = 1; n <= m_; ++n) {
      const StepEvaluation ev = evaluate_step(*model_, state(w, k, n - 1), state(w, k, n), u, d, h, true);
      const int row = residual_offset(k, n);
      put(row, state_offset(k, n), ev.d_next);
      if (n > 1) {
        put(row, state_offset(k, n - 1), ev.d_prev);
      } else if (k > 0) {
        put(row, state_offset(k - 1, m_), ev.d_prev);
      }
      put(row, input_offset(k), ev.d_u);
    }
  }
  SpMat j(num_constraints(), num_variables());
  j.setFromTriplets(trips.begin(), trips.end());
  return j;
}

Vec TranscribedNlp::lower_bounds() const {
  Vec lo(num_variables());
  for (int k = 0; k < ocp_.intervals; ++k) {
    for (int n = 1; n <= m_; ++n) lo.segment(state_offset(k, n), model_->nx()) = ocp_.x_min;
    lo.segment(input_offset(k), model_->nu()) = ocp_.u_min;
  }
  return lo;
}

Vec TranscribedNlp::upper_bounds() const {
  Vec hi(num_variables());
  for (int k = 0; k < ocp_.intervals; ++k) {
    for (int n = 1; n <= m_; ++n) hi.segment(state_offset(k, n), model_->nx()) = ocp_.x_max;
    hi.segment(input_offset(k), model_->nu()) = ocp_.u_max;
  }
  return hi;
}

Vec TranscribedNlp::variable_scales() const {
  const Vec xs = model_->state_scales();
  const Vec us = model_->input_scales();
  Vec s(num_variables());
  for (int k = 0; k < ocp_.intervals; ++k) {
    for (int n = 1; n <= m_; ++n) s.segment(state_offset(k, n), model_->nx()) = xs;
    s.segment(input_offset(k), model_->nu()) = us;
  }
  return s;
}

Vec TranscribedNlp::constraint_scales() const {
  const Vec row = model_->state_scales().cwiseMin(1.0);
  Vec s(num_constraints());
  for (int j = 0; j < ocp_.intervals * m_; ++j) s.segment(j * model_->nx(), model_->nx()) = row;
  return s;
}

std::optional<SpMat> TranscribedNlp::objective_hessian(const Vec& w) const {
  check_size(w);
  const double h = step_size();
  const double big_dt = ocp_.dt();
  std::vector<Eigen::Triplet<double>> trips;
  auto put = [&](int row0, int col0, const Mat& block) {
    for (int c = 0; c < block.cols(); ++c) {
      for (int r = 0; r < block.rows(); ++r) {
        if (block(r, c) != 0.0) trips.emplace_back(row0 + r, col0 + c, block(r, c));
      }
    }
  };
  for (int k = 0; k < ocp_.intervals; ++k) {
    const Vec u = input(w, k);
    const Vec d = ocp_.disturbance(k);
    for (int n = 1; n <= m_; ++n) {
      put(state_offset(k, n), state_offset(k, n), ocp_.stage_cost->hess_xx(state(w, k, n), u, d) * h);
    }
    Mat huu = ocp_.weight(k) / big_dt;
    if (k + 1 < ocp_.intervals) {
      const Mat wn = ocp_.weight(k + 1) / big_dt;
      huu += wn;
      put(input_offset(k), input_offset(k + 1), -wn);
      put(input_offset(k + 1), input_offset(k), -wn);
    }
    put(input_offset(k), input_offset(k), huu);
  }
  SpMat hess(num_variables(), num_variables());
  hess.setFromTriplets(trips.begin(), trips.end());
  return hess;
}

}  // namespace ddenoc
