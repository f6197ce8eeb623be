#pragma once

#include "ddenoc/dde_model.hpp"

#include <array>

namespace ddenoc::msr {

inline constexpr int kGroups = 6;
inline constexpr int kStates = 10;
inline constexpr int kInputs = 2;

/// Positions inside the packed state x = (C_1..C_6, C_n, rho_th, T_r, T_hx).
enum StateIndex : int { kC1 = 0, kCn = 6, kRhoTh = 7, kTr = 8, kThx = 9 };
/// Positions inside u = (rho_ext [pcm], v [m/s]).
enum InputIndex : int { kRhoExt = 0, kVelocity = 1 };

/// 1 pcm in absolute reactivity units.
inline constexpr double kPcm = 1e-5;

/// Molten-salt reactor parameters. Defaults are the nominal plant values.
struct MsrParams {
  std::array<double, kGroups> decay = {0.0124, 0.0305, 0.1110, 0.3010, 1.1300, 3.0000};  ///< 1/s
  std::array<double, kGroups> beta_group = {0.00021, 0.00141, 0.00127, 0.00255, 0.00074, 0.00027};
  double beta_tabulated = 0.0065;   ///< rounded total; not used by the dynamics
  double generation_time = 5e-5;    ///< Lambda [s]
  double heat_capacity = 2e-3;      ///< c_P [MJ/(kg K)]
  double hx_conductivity = 0.5;     ///< k_hx [MW/K]
  double thermal_coeff = 5e-5;      ///< kappa [1/K]
  double salt_density = 2000.0;     ///< [kg/m^3]
  double core_mass = 10000.0;       ///< m_r [kg]
  double hx_mass = 2500.0;          ///< m_hx [kg]
  double core_volume = 0.5;         ///< V [m^3]
  double pipe_area = 0.3;           ///< A [m^2]
  double pipe_length = 30.0;        ///< L [m]
  double coolant_temp = 723.15;     ///< T_c [K]
  double nominal_power = 1.0;       ///< Q_{g,0} [MW]
  double nominal_neutrons = 1.0;    ///< C_{n,0} [1/m^3]

  /// Total delayed fraction, the sum of the group fractions.
  double beta() const;
  /// Throws ConfigError unless every parameter is finite and positive.
  void validate() const;
};

/// Named view of the packed 10-state vector.
struct MsrState {
  std::array<double, kGroups> precursors{};
  double neutrons = 0.0;
  double thermal_reactivity = 0.0;  ///< absolute units
  double core_temp = 0.0;
  double hx_temp = 0.0;

  Vec pack() const;
  static MsrState unpack(const VecRef& x);
};

/// Circulating-fuel reactor: 10 states, 2 inputs, 2 delays
/// tau_1 = L/v (precursor return) and tau_2 = L/(2v) (core <-> heat exchanger).
class MsrModel : public DdeModel {
 public:
  explicit MsrModel(MsrParams params = {});

  const MsrParams& params() const { return params_; }

  int nx() const override { return kStates; }
  int nu() const override { return kInputs; }
  int num_delays() const override { return 2; }
  int delayed_dim(int i) const override { return i == 0 ? kGroups : 2; }

  double delay(int i, const VecRef& u) const override;
  RowVec delay_jacobian(int i, const VecRef& u) const override;
  double max_delay(int i, const VecRef& u_min, const VecRef& u_max) const override;

  Vec rhs(const VecRef& x, const VecRef& z, const VecRef& u, const VecRef& d) const override;
  RhsJacobians rhs_jacobians(const VecRef& x, const VecRef& z, const VecRef& u,
                             const VecRef& d) const override;

  Vec delayed_map(int i, const VecRef& x) const override;
  Mat delayed_map_jacobian(int i, const VecRef& x) const override;

  std::vector<std::string> state_names() const override;
  std::vector<std::string> input_names() const override;
  /// Q_g [MW], total reactivity [pcm], tau_1 [s].
  std::vector<std::string> output_names() const override;
  Vec outputs(const VecRef& x, const VecRef& u) const override;

  Vec state_scales() const override;
  Vec input_scales() const override;

  /// Q_g = Q_{g,0} C_n / C_{n,0}.
  double generated_power(const VecRef& x) const;
  /// Dilution rate D = A v / V.
  double dilution_rate(double v) const;
  /// Salt mass flow f_r = f_hx = rho_salt A v.
  double mass_flow(double v) const;

 private:
  MsrParams params_;
  double beta_;
};

/// Steady-state total reactivity (absolute units) that makes the neutron
/// balance stationary with precursors lost in the external loop.
double critical_reactivity(double v, const MsrParams& params);

/// Closed-form steady state for velocity v, external reactivity rho_ext [pcm]
/// and generated power q [MW].
MsrState steady_state(double v, double rho_ext_pcm, double q, const MsrParams& params);

}  // namespace ddenoc::msr
