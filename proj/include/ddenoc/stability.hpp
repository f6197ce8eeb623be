#pragma once

#include "ddenoc/char_det.hpp"
#include "ddenoc/dde_model.hpp"

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace ddenoc {

using Complex = std::complex<double>;

/// Linearization of a DDE around a steady state:
///   x' = A0 x + sum_i B_i x(t - tau_i).
struct SteadyLinearization {
  Mat a0;
  std::vector<Mat> b;
  std::vector<double> tau;
  Vec x_s, u_s, d_s;

  int n() const { return static_cast<int>(a0.rows()); }
  int num_delays() const { return static_cast<int>(b.size()); }
  kernels::CharMatrices char_matrices() const;
};

/// Builds a linearization directly from matrices (x_s etc. left empty).
SteadyLinearization make_linearization(Mat a0, std::vector<Mat> b, std::vector<double> tau);

/// Assembles A0 = df/dx and B_i = (df/dz)_{block i} dh_i/dx at a steady
/// state. Refuses (SteadyStateError) when ||f(x_s, z_s, u_s, d_s)||_inf
/// exceeds `tol`.
SteadyLinearization linearize_at_steady_state(const DdeModel& model, const VecRef& x_s,
                                              const VecRef& u_s, const VecRef& d_s,
                                              double tol = 1e-8);

enum class RootMethod { transcendental, generalized_eigen };
const char* method_name(RootMethod method);

struct Root {
  Complex value;
  double residual = 0.0;  ///< |det| relative to kernels::char_log_row_scale
  RootMethod method = RootMethod::transcendental;
};

/// Rectangle in the complex plane sampled by the transcendental scan.
struct ScanWindow {
  double re_min = -30.0;
  double re_max = 5.0;
  double im_min = 0.0;
  double im_max = 15.0;
  int re_points = 600;
  int im_points = 600;
};

struct RootSet {
  std::vector<Root> roots;
  RootMethod method = RootMethod::transcendental;
  std::optional<ScanWindow> window;  ///< set for scans only
  int dropped_candidates = 0;        ///< Newton failures during refinement

  /// Roots plus the conjugates of complex roots not already listed.
  std::vector<Complex> with_conjugates() const;
  /// Number of roots with Re(lambda) > tol.
  int count_unstable(double tol) const;
};

/// det(lambda I - A0 - sum_i B_i exp(-tau_i lambda)). The plain value may
/// overflow far in the left half plane; use the scaled variant there.
Complex char_fn_dde(const SteadyLinearization& lin, Complex lambda);
kernels::ScaledDet char_fn_dde_scaled(const SteadyLinearization& lin, Complex lambda);

/// det(lambda M - K) with K = A0 + sum B_i and M = I + sum tau_i B_i: the
/// characteristic function of the linearized-delay system in pencil form.
Complex char_fn_approx(const SteadyLinearization& lin, Complex lambda);

/// det(lambda I - A0 - sum_i c_i B_i) for arbitrary factors c_i.
kernels::ScaledDet char_fn_with_factors(const SteadyLinearization& lin, Complex lambda,
                                        const std::vector<Complex>& factors);

/// exp(-tau_i lambda) for every delay.
std::vector<Complex> delay_factors(const SteadyLinearization& lin, Complex lambda);
/// 1 - tau_i lambda for every delay.
std::vector<Complex> linearized_delay_factors(const SteadyLinearization& lin, Complex lambda);

/// |det T(lambda)| / prod_r ||row_r T(lambda)||_2 for the delay system.
double relative_residual_dde(const SteadyLinearization& lin, Complex lambda);

/// Sampled characteristic function for contour plots.
struct GridField {
  std::vector<double> re;
  std::vector<double> im;
  Mat log10_abs;  ///< im.size() x re.size()
  Mat phase_cos;  ///< cos(arg det); its zero set is the Re(det) = 0 contour
  Mat phase_sin;  ///< sin(arg det); its zero set is the Im(det) = 0 contour
};

struct ScanOptions {
  ScanWindow window;
  int threads = 1;
  double dedup_radius = 1e-6;
  int newton_max_iter = 50;
  double residual_tol = 1e-8;
  /// Maximum number of 2x2 refinements of a cell enclosing several roots.
  int max_subdivision = 12;
  /// Phase change between neighbouring samples above which an edge is
  /// resampled when accumulating winding numbers.
  double max_phase_step = 1.5707963267948966;
  GridField* field = nullptr;  ///< filled when non-null
};

/// Roots of the transcendental characteristic function inside the window.
///
/// The determinant is sampled on the grid with the batched kernel. Candidate
/// cells are those whose corners show sign changes in both Re and Im, or whose
/// boundary winding number is non-zero. Cells enclosing several roots are
/// subdivided; each candidate is refined by damped Newton with a central
/// difference derivative. Only roots with Im >= 0 are reported; conjugates are
/// implied. When the window starts on the real axis its lower edge is moved
/// half a row below it so real roots are interior to the first row of cells.
RootSet find_roots_dde(const SteadyLinearization& lin, const ScanOptions& options = {});

/// Generalized eigenvalues of the pencil (K, M). Throws DegeneratePencil
/// when cond(M) exceeds `max_condition`.
RootSet find_roots_approx(const SteadyLinearization& lin, double max_condition = 1e12);

}  // namespace ddenoc
