#pragma once

#include <complex>
#include <span>
#include <vector>

namespace ddenoc::kernels {

/// Determinant stored as mantissa * 2^exponent. The mantissa's largest
/// component lies in [1, 2) unless the determinant is exactly zero.
struct ScaledDet {
  std::complex<double> mantissa{0.0, 0.0};
  long exponent = 0;

  bool is_zero() const { return mantissa == std::complex<double>(0.0, 0.0); }
  /// log |det|, -inf for an exactly singular matrix.
  double log_abs() const;
  /// det / |det| (zero for a singular matrix).
  std::complex<double> phase() const;
  /// The plain value; overflows to inf for huge determinants.
  std::complex<double> value() const;
};

/// Real data of the characteristic matrix
///   T(lambda) = lambda I - A0 - sum_i c_i B_i
/// where the complex factors c_i are supplied per evaluation point
/// (exp(-tau_i lambda) for the delay system, 1 - tau_i lambda for its
/// linearized-delay approximation). Matrices are row-major.
struct CharMatrices {
  int n = 0;
  int m = 0;
  std::vector<double> a0;  ///< n*n
  std::vector<double> b;   ///< m*n*n, block i at offset i*n*n
};

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);
/// Whether the AVX2 kernel was compiled in and the CPU supports AVX2+FMA.
bool avx2_available();
/// Kernel used by char_det_batch: AVX2 when available unless the environment
/// variable DDENOC_SIMD=scalar asks otherwise.
Isa active_isa();

/// det T(lambda_k) for each k. `factors` holds m entries per lambda
/// (row k at offset k*m); `out` has one slot per lambda.
void char_det_batch_scalar(const CharMatrices& mats, std::span<const std::complex<double>> lambdas,
                           std::span<const std::complex<double>> factors, std::span<ScaledDet> out);

/// Same contract as the scalar kernel; four evaluation points per AVX2 lane
/// group with per-lane partial pivoting. Only callable when avx2_available().
void char_det_batch_avx2(const CharMatrices& mats, std::span<const std::complex<double>> lambdas,
                         std::span<const std::complex<double>> factors, std::span<ScaledDet> out);

/// Dispatches to the requested kernel (active_isa() by default).
void char_det_batch(const CharMatrices& mats, std::span<const std::complex<double>> lambdas,
                    std::span<const std::complex<double>> factors, std::span<ScaledDet> out);
void char_det_batch(const CharMatrices& mats, std::span<const std::complex<double>> lambdas,
                    std::span<const std::complex<double>> factors, std::span<ScaledDet> out, Isa isa);

/// Single-point scalar evaluation.
ScaledDet char_det(const CharMatrices& mats, std::complex<double> lambda,
                   std::span<const std::complex<double>> factors);

/// Log of prod_r ||row_r(M)||_2 where M = |lambda| I + |A0| + sum_i |c_i| |B_i|
/// entrywise: a Hadamard-type bound built from term magnitudes, the scale
/// against which a cancelled |det T| is judged.
double char_log_row_scale(const CharMatrices& mats, std::complex<double> lambda,
                          std::span<const std::complex<double>> factors);

}  // namespace ddenoc::kernels
