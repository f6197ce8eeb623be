#include "ddenoc/char_det.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace ddenoc::kernels {

double ScaledDet::log_abs() const {
  if (is_zero()) return -std::numeric_limits<double>::infinity();
  return std::log(std::abs(mantissa)) + static_cast<double>(exponent) * std::log(2.0);
}

std::complex<double> ScaledDet::phase() const {
  if (is_zero()) return {0.0, 0.0};
  return mantissa / std::abs(mantissa);
}

std::complex<double> ScaledDet::value() const {
  if (exponent > std::numeric_limits<int>::max() || exponent < std::numeric_limits<int>::min()) {
    return exponent > 0 ? std::complex<double>(std::numeric_limits<double>::infinity(), 0.0)
                        : std::complex<double>(0.0, 0.0);
  }
  const int e = static_cast<int>(exponent);
  return {std::ldexp(mantissa.real(), e), std::ldexp(mantissa.imag(), e)};
}

namespace {

// Unbiased binary exponent of a positive normal double, read from its bits so
// the SIMD kernel can reproduce it exactly.
long exponent_bits(double s) {
  std::uint64_t bits;
  std::memcpy(&bits, &s, sizeof bits);
  return static_cast<long>((bits >> 52) & 0x7ff) - 1023;
}

double pow2(long e) {
  const std::uint64_t bits = static_cast<std::uint64_t>(1023 + e) << 52;
  double out;
  std::memcpy(&out, &bits, sizeof out);
  return out;
}

void build_matrix(const CharMatrices& mats, std::complex<double> lambda,
                  std::span<const std::complex<double>> factors, std::vector<double>& re,
                  std::vector<double>& im) {
  const int n = mats.n;
  const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  re.assign(nn, 0.0);
  im.assign(nn, 0.0);
  for (std::size_t k = 0; k < nn; ++k) re[k] = -mats.a0[k];
  for (int i = 0; i < mats.m; ++i) {
    const double cr = factors[static_cast<std::size_t>(i)].real();
    const double ci = factors[static_cast<std::size_t>(i)].imag();
    const double* b = mats.b.data() + static_cast<std::size_t>(i) * nn;
    for (std::size_t k = 0; k < nn; ++k) {
      re[k] -= cr * b[k];
      im[k] -= ci * b[k];
    }
  }
  for (int r = 0; r < n; ++r) {
    const std::size_t d = static_cast<std::size_t>(r) * static_cast<std::size_t>(n + 1);
    re[d] += lambda.real();
    im[d] += lambda.imag();
  }
}

ScaledDet lu_determinant(int n, std::vector<double>& re, std::vector<double>& im) {
  const auto at = [n](int r, int c) { return static_cast<std::size_t>(r) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c); };
  double mr = 1.0;
  double mi = 0.0;
  long expo = 0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(re[at(k, k)]) + std::abs(im[at(k, k)]);
    for (int i = k + 1; i < n; ++i) {
      const double mag = std::abs(re[at(i, k)]) + std::abs(im[at(i, k)]);
      if (mag > best) {
        best = mag;
        piv = i;
      }
    }
    if (best == 0.0) return {};
    if (piv != k) {
      for (int j = k; j < n; ++j) {
        std::swap(re[at(k, j)], re[at(piv, j)]);
        std::swap(im[at(k, j)], im[at(piv, j)]);
      }
      mr = -mr;
      mi = -mi;
    }
    const double pr = re[at(k, k)];
    const double pi = im[at(k, k)];

    const double nr = mr * pr - mi * pi;
    const double ni = mr * pi + mi * pr;
    const double s = std::max(std::abs(nr), std::abs(ni));
    const long e = exponent_bits(s);
    const double scale = pow2(-e);
    mr = nr * scale;
    mi = ni * scale;
    expo += e;

    const double ps = std::max(std::abs(pr), std::abs(pi));
    const double qr = pr / ps;
    const double qi = pi / ps;
    const double den = (qr * qr + qi * qi) * ps;
    const double inv_r = qr / den;
    const double inv_i = -qi / den;
    for (int i = k + 1; i < n; ++i) {
      const double ar = re[at(i, k)];
      const double ai = im[at(i, k)];
      const double lr = ar * inv_r - ai * inv_i;
      const double li = ar * inv_i + ai * inv_r;
      for (int j = k + 1; j < n; ++j) {
        const double kr = re[at(k, j)];
        const double ki = im[at(k, j)];
        re[at(i, j)] -= lr * kr - li * ki;
        im[at(i, j)] -= lr * ki + li * kr;
      }
    }
  }
  return {{mr, mi}, expo};
}

void check_sizes(const CharMatrices& mats, std::size_t count, std::size_t factor_count,
                 std::size_t out_count) {
  const auto nn = static_cast<std::size_t>(mats.n) * static_cast<std::size_t>(mats.n);
  if (mats.a0.size() != nn || mats.b.size() != nn * static_cast<std::size_t>(mats.m)) {
    throw std::invalid_argument("char_det: matrix storage does not match n, m");
  }
  if (factor_count != count * static_cast<std::size_t>(mats.m) || out_count < count) {
    throw std::invalid_argument("char_det: factor/output spans do not match lambda count");
  }
}

}  // namespace

void char_det_batch_scalar(const CharMatrices& mats, std::span<const std::complex<double>> lambdas,
                           std::span<const std::complex<double>> factors, std::span<ScaledDet> out) {
  check_sizes(mats, lambdas.size(), factors.size(), out.size());
  std::vector<double> re;
  std::vector<double> im;
  const auto m = static_cast<std::size_t>(mats.m);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    build_matrix(mats, lambdas[k], factors.subspan(k * m, m), re, im);
    out[k] = lu_determinant(mats.n, re, im);
  }
}

ScaledDet char_det(const CharMatrices& mats, std::complex<double> lambda,
                   std::span<const std::complex<double>> factors) {
  ScaledDet out;
  char_det_batch_scalar(mats, std::span(&lambda, 1), factors, std::span(&out, 1));
  return out;
}

double char_log_row_scale(const CharMatrices& mats, std::complex<double> lambda,
                          std::span<const std::complex<double>> factors) {
  const auto n = static_cast<std::size_t>(mats.n);
  const auto m = static_cast<std::size_t>(mats.m);
  // |lambda I| + |A0| + sum_i |c_i| |B_i|, entry by entry.
  std::vector<double> mag(n * n);
  for (std::size_t k = 0; k < n * n; ++k) mag[k] = std::abs(mats.a0[k]);
  for (std::size_t i = 0; i < m; ++i) {
    const double c = std::abs(factors[i]);
    for (std::size_t k = 0; k < n * n; ++k) mag[k] += c * std::abs(mats.b[i * n * n + k]);
  }
  for (std::size_t r = 0; r < n; ++r) mag[r * n + r] += std::abs(lambda);
  double log_scale = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    // Scale the row before squaring so huge exponential factors cannot overflow.
    double big = 0.0;
    for (std::size_t c = 0; c < n; ++c) big = std::max(big, mag[r * n + c]);
    if (big == 0.0) return -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double a = mag[r * n + c] / big;
      sum += a * a;
    }
    log_scale += std::log(big) + 0.5 * std::log(sum);
  }
  return log_scale;
}

}  // namespace ddenoc::kernels
