#include "ddenoc/msr_model.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <mutex>
#include <sstream>

namespace ddenoc::msr {

double MsrParams::beta() const {
  double sum = 0.0;
  for (double b : beta_group) sum += b;
  return sum;
}

void MsrParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw ConfigError(std::string("MSR parameter '") + name + "' must be finite and positive");
    }
  };
  for (int i = 0; i < kGroups; ++i) {
    positive(decay[static_cast<std::size_t>(i)], "lambda");
    positive(beta_group[static_cast<std::size_t>(i)], "beta_i");
  }
  positive(generation_time, "Lambda");
  positive(heat_capacity, "c_P");
  positive(hx_conductivity, "k_hx");
  positive(thermal_coeff, "kappa");
  positive(salt_density, "rho_salt");
  positive(core_mass, "m_r");
  positive(hx_mass, "m_hx");
  positive(core_volume, "V");
  positive(pipe_area, "A");
  positive(pipe_length, "L");
  positive(coolant_temp, "T_c");
  positive(nominal_power, "Q_g0");
  positive(nominal_neutrons, "C_n0");
}

Vec MsrState::pack() const {
  Vec x(kStates);
  for (int i = 0; i < kGroups; ++i) x[i] = precursors[static_cast<std::size_t>(i)];
  x[kCn] = neutrons;
  x[kRhoTh] = thermal_reactivity;
  x[kTr] = core_temp;
  x[kThx] = hx_temp;
  return x;
}

MsrState MsrState::unpack(const VecRef& x) {
  MsrState s;
  for (int i = 0; i < kGroups; ++i) s.precursors[static_cast<std::size_t>(i)] = x[i];
  s.neutrons = x[kCn];
  s.thermal_reactivity = x[kRhoTh];
  s.core_temp = x[kTr];
  s.hx_temp = x[kThx];
  return s;
}

namespace {

double velocity(const VecRef& u) {
  const double v = u[kVelocity];
  if (!(v > 0.0)) {
    std::ostringstream msg;
    msg << "salt velocity must be positive, got v = " << v;
    throw DomainError(msg.str());
  }
  return v;
}

}  // namespace

MsrModel::MsrModel(MsrParams params) : params_(params) {
  params_.validate();
  beta_ = params_.beta();
  if (std::abs(beta_ - params_.beta_tabulated) > 1e-12) {
    static std::once_flag once;
    std::call_once(once, [&] {
      spdlog::info("MSR: total delayed fraction taken as sum of groups {:.5f} (tabulated {:.5f})",
                   beta_, params_.beta_tabulated);
    });
  }
}

double MsrModel::dilution_rate(double v) const { return params_.pipe_area * v / params_.core_volume; }

double MsrModel::mass_flow(double v) const { return params_.salt_density * params_.pipe_area * v; }

double MsrModel::generated_power(const VecRef& x) const {
  return params_.nominal_power * x[kCn] / params_.nominal_neutrons;
}

double MsrModel::delay(int i, const VecRef& u) const {
  const double tau = params_.pipe_length / velocity(u);
  return i == 0 ? tau : 0.5 * tau;
}

RowVec MsrModel::delay_jacobian(int i, const VecRef& u) const {
  const double v = velocity(u);
  RowVec g = RowVec::Zero(kInputs);
  g[kVelocity] = -params_.pipe_length / (v * v) * (i == 0 ? 1.0 : 0.5);
  return g;
}

double MsrModel::max_delay(int i, const VecRef& u_min, const VecRef&) const {
  return delay(i, u_min);
}

Vec MsrModel::rhs(const VecRef& x, const VecRef& z, const VecRef& u, const VecRef&) const {
  const auto& p = params_;
  const double v = velocity(u);
  const double tau = p.pipe_length / v;
  const double dil = dilution_rate(v);
  const double flow = mass_flow(v);
  const double cn = x[kCn];
  const double rho = x[kRhoTh] + kPcm * u[kRhoExt];

  Vec dx(kStates);
  double precursor_source = 0.0;
  for (int i = 0; i < kGroups; ++i) {
    const auto g = static_cast<std::size_t>(i);
    const double inlet = z[i] * std::exp(-p.decay[g] * tau);
    dx[i] = (inlet - x[i]) * dil + p.beta_group[g] * cn / p.generation_time - p.decay[g] * x[i];
    precursor_source += p.decay[g] * x[i];
  }
  dx[kCn] = precursor_source + (rho - beta_) * cn / p.generation_time;

  const double core_temp_rate = flow / p.core_mass * (z[kGroups + 1] - x[kTr]) +
                                generated_power(x) / (p.core_mass * p.heat_capacity);
  dx[kTr] = core_temp_rate;
  dx[kRhoTh] = -p.thermal_coeff * core_temp_rate;
  dx[kThx] = flow / p.hx_mass * (z[kGroups] - x[kThx]) -
             p.hx_conductivity / (p.hx_mass * p.heat_capacity) * (x[kThx] - p.coolant_temp);
  return dx;
}

RhsJacobians MsrModel::rhs_jacobians(const VecRef& x, const VecRef& z, const VecRef& u,
                                     const VecRef&) const {
  const auto& p = params_;
  const double v = velocity(u);
  const double tau = p.pipe_length / v;
  const double dtau_dv = -p.pipe_length / (v * v);
  const double dil = dilution_rate(v);
  const double ddil_dv = p.pipe_area / p.core_volume;
  const double flow = mass_flow(v);
  const double dflow_dv = p.salt_density * p.pipe_area;
  const double cn = x[kCn];
  const double rho = x[kRhoTh] + kPcm * u[kRhoExt];
  const int z_tr = kGroups;
  const int z_thx = kGroups + 1;

  RhsJacobians jac{Mat::Zero(kStates, kStates), Mat::Zero(kStates, nz()), Mat::Zero(kStates, kInputs)};
  for (int i = 0; i < kGroups; ++i) {
    const auto g = static_cast<std::size_t>(i);
    const double decay_factor = std::exp(-p.decay[g] * tau);
    const double ddecay_dv = -p.decay[g] * dtau_dv * decay_factor;
    jac.fx(i, i) = -dil - p.decay[g];
    jac.fx(i, kCn) = p.beta_group[g] / p.generation_time;
    jac.fz(i, i) = decay_factor * dil;
    jac.fu(i, kVelocity) = z[i] * ddecay_dv * dil + (z[i] * decay_factor - x[i]) * ddil_dv;

    jac.fx(kCn, i) = p.decay[g];
  }
  jac.fx(kCn, kCn) = (rho - beta_) / p.generation_time;
  jac.fx(kCn, kRhoTh) = cn / p.generation_time;
  jac.fu(kCn, kRhoExt) = kPcm * cn / p.generation_time;

  jac.fx(kTr, kTr) = -flow / p.core_mass;
  jac.fx(kTr, kCn) = p.nominal_power / (p.nominal_neutrons * p.core_mass * p.heat_capacity);
  jac.fz(kTr, z_thx) = flow / p.core_mass;
  jac.fu(kTr, kVelocity) = dflow_dv / p.core_mass * (z[z_thx] - x[kTr]);

  jac.fx.row(kRhoTh) = -p.thermal_coeff * jac.fx.row(kTr);
  jac.fz.row(kRhoTh) = -p.thermal_coeff * jac.fz.row(kTr);
  jac.fu.row(kRhoTh) = -p.thermal_coeff * jac.fu.row(kTr);

  jac.fx(kThx, kThx) = -flow / p.hx_mass - p.hx_conductivity / (p.hx_mass * p.heat_capacity);
  jac.fz(kThx, z_tr) = flow / p.hx_mass;
  jac.fu(kThx, kVelocity) = dflow_dv / p.hx_mass * (z[z_tr] - x[kThx]);
  return jac;
}

Vec MsrModel::delayed_map(int i, const VecRef& x) const {
  if (i == 0) return x.head(kGroups);
  Vec r(2);
  r << x[kTr], x[kThx];
  return r;
}

Mat MsrModel::delayed_map_jacobian(int i, const VecRef&) const {
  if (i == 0) {
    Mat h = Mat::Zero(kGroups, kStates);
    h.leftCols(kGroups).setIdentity();
    return h;
  }
  Mat h = Mat::Zero(2, kStates);
  h(0, kTr) = 1.0;
  h(1, kThx) = 1.0;
  return h;
}

std::vector<std::string> MsrModel::state_names() const {
  return {"C1", "C2", "C3", "C4", "C5", "C6", "Cn", "rho_th", "T_r", "T_hx"};
}

std::vector<std::string> MsrModel::input_names() const { return {"rho_ext", "v"}; }

std::vector<std::string> MsrModel::output_names() const { return {"Q_g", "rho_total", "tau_1"}; }

Vec MsrModel::outputs(const VecRef& x, const VecRef& u) const {
  Vec y(3);
  y << generated_power(x), x[kRhoTh] / kPcm + u[kRhoExt], delay(0, u);
  return y;
}

Vec MsrModel::state_scales() const {
  Vec s = Vec::Ones(kStates);
  s[kRhoTh] = 100.0 * kPcm;
  s[kTr] = 100.0;
  s[kThx] = 100.0;
  return s;
}

Vec MsrModel::input_scales() const {
  Vec s(kInputs);
  s << 100.0, 1.0;
  return s;
}

double critical_reactivity(double v, const MsrParams& p) {
  if (!(v > 0.0)) throw DomainError("critical reactivity needs v > 0");
  const double tau = p.pipe_length / v;
  const double dil = p.pipe_area * v / p.core_volume;
  double rho = 0.0;
  for (int i = 0; i < kGroups; ++i) {
    const auto g = static_cast<std::size_t>(i);
    // -expm1 keeps precision in the short-loop limit.
    const double loss = dil * -std::expm1(-p.decay[g] * tau);
    rho += p.beta_group[g] * loss / (p.decay[g] + loss);
  }
  return rho;
}

MsrState steady_state(double v, double rho_ext_pcm, double q, const MsrParams& p) {
  if (!(v > 0.0)) throw DomainError("steady state needs v > 0");
  if (!(q > 0.0)) throw DomainError("steady state needs Q_g > 0");
  const double tau = p.pipe_length / v;
  const double dil = p.pipe_area * v / p.core_volume;
  const double flow = p.salt_density * p.pipe_area * v;

  MsrState s;
  s.neutrons = p.nominal_neutrons * q / p.nominal_power;
  for (int i = 0; i < kGroups; ++i) {
    const auto g = static_cast<std::size_t>(i);
    const double loss = dil * -std::expm1(-p.decay[g] * tau);
    s.precursors[g] = p.beta_group[g] * s.neutrons / (p.generation_time * (p.decay[g] + loss));
  }
  s.hx_temp = p.coolant_temp + q / p.hx_conductivity;
  s.core_temp = s.hx_temp + q / (flow * p.heat_capacity);
  s.thermal_reactivity = critical_reactivity(v, p) - kPcm * rho_ext_pcm;
  return s;
}

}  // namespace ddenoc::msr
