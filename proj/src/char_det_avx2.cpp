// Batched characteristic determinants, four evaluation points per vector.
// Layout is structure-of-arrays: element (r, c) of the four matrices lives in
// one __m256d for the real parts and one for the imaginary parts. Pivoting is
// per lane; row swaps are done with blends so lanes never diverge.
#include "ddenoc/char_det.hpp"

#include <immintrin.h>

#include <array>
#include <stdexcept>
#include <vector>

// std::vector<__m256d> drops the vector_size attribute on the template
// argument; alignment is still guaranteed by the C++17 allocator.
#pragma GCC diagnostic ignored "-Wignored-attributes"

namespace ddenoc::kernels {

namespace {

constexpr int kLanes = 4;

inline __m256d abs_pd(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

// Unbiased exponent of each (positive, normal) lane, as 64-bit integers.
inline __m256i exponent_bits(__m256d s) {
  const __m256i bits = _mm256_castpd_si256(s);
  const __m256i biased = _mm256_and_si256(_mm256_srli_epi64(bits, 52), _mm256_set1_epi64x(0x7ff));
  return _mm256_sub_epi64(biased, _mm256_set1_epi64x(1023));
}

// 2^-e for each lane.
inline __m256d inverse_pow2(__m256i e) {
  const __m256i biased = _mm256_sub_epi64(_mm256_set1_epi64x(1023), e);
  return _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
}

void det_group(const CharMatrices& mats, const std::complex<double>* lambdas,
               const std::complex<double>* factors, ScaledDet* out, std::vector<__m256d>& re,
               std::vector<__m256d>& im) {
  const int n = mats.n;
  const int m = mats.m;
  const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  re.resize(nn);
  im.resize(nn);
  const auto at = [n](int r, int c) { return static_cast<std::size_t>(r) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c); };

  const __m256d lam_r = _mm256_setr_pd(lambdas[0].real(), lambdas[1].real(), lambdas[2].real(), lambdas[3].real());
  const __m256d lam_i = _mm256_setr_pd(lambdas[0].imag(), lambdas[1].imag(), lambdas[2].imag(), lambdas[3].imag());

  for (std::size_t k = 0; k < nn; ++k) {
    re[k] = _mm256_set1_pd(-mats.a0[k]);
    im[k] = _mm256_setzero_pd();
  }
  for (int i = 0; i < m; ++i) {
    const auto fi = static_cast<std::size_t>(i);
    const auto mm = static_cast<std::size_t>(m);
    const __m256d cr = _mm256_setr_pd(factors[fi].real(), factors[mm + fi].real(),
                                      factors[2 * mm + fi].real(), factors[3 * mm + fi].real());
    const __m256d ci = _mm256_setr_pd(factors[fi].imag(), factors[mm + fi].imag(),
                                      factors[2 * mm + fi].imag(), factors[3 * mm + fi].imag());
    const double* b = mats.b.data() + fi * nn;
    for (std::size_t k = 0; k < nn; ++k) {
      if (b[k] == 0.0) continue;
      const __m256d bk = _mm256_set1_pd(b[k]);
      re[k] = _mm256_fnmadd_pd(cr, bk, re[k]);
      im[k] = _mm256_fnmadd_pd(ci, bk, im[k]);
    }
  }
  for (int r = 0; r < n; ++r) {
    re[at(r, r)] = _mm256_add_pd(re[at(r, r)], lam_r);
    im[at(r, r)] = _mm256_add_pd(im[at(r, r)], lam_i);
  }

  __m256d mr = _mm256_set1_pd(1.0);
  __m256d mi = _mm256_setzero_pd();
  __m256i expo = _mm256_setzero_si256();
  __m256d singular = _mm256_setzero_pd();  // all-ones lanes once a zero pivot appears
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);

  for (int k = 0; k < n; ++k) {
    __m256d best = _mm256_add_pd(abs_pd(re[at(k, k)]), abs_pd(im[at(k, k)]));
    __m256d piv = _mm256_set1_pd(static_cast<double>(k));
    for (int i = k + 1; i < n; ++i) {
      const __m256d mag = _mm256_add_pd(abs_pd(re[at(i, k)]), abs_pd(im[at(i, k)]));
      const __m256d better = _mm256_cmp_pd(mag, best, _CMP_GT_OQ);
      best = _mm256_blendv_pd(best, mag, better);
      piv = _mm256_blendv_pd(piv, _mm256_set1_pd(static_cast<double>(i)), better);
    }
    const __m256d zero_pivot = _mm256_cmp_pd(best, zero, _CMP_EQ_OQ);
    singular = _mm256_or_pd(singular, zero_pivot);

    for (int i = k + 1; i < n; ++i) {
      const __m256d swap = _mm256_cmp_pd(piv, _mm256_set1_pd(static_cast<double>(i)), _CMP_EQ_OQ);
      if (_mm256_movemask_pd(swap) == 0) continue;
      for (int j = k; j < n; ++j) {
        const __m256d kr = re[at(k, j)];
        const __m256d ki = im[at(k, j)];
        const __m256d ir = re[at(i, j)];
        const __m256d ii = im[at(i, j)];
        re[at(k, j)] = _mm256_blendv_pd(kr, ir, swap);
        im[at(k, j)] = _mm256_blendv_pd(ki, ii, swap);
        re[at(i, j)] = _mm256_blendv_pd(ir, kr, swap);
        im[at(i, j)] = _mm256_blendv_pd(ii, ki, swap);
      }
    }
    const __m256d swapped = _mm256_cmp_pd(piv, _mm256_set1_pd(static_cast<double>(k)), _CMP_NEQ_OQ);
    const __m256d sign = _mm256_and_pd(swapped, _mm256_set1_pd(-0.0));
    mr = _mm256_xor_pd(mr, sign);
    mi = _mm256_xor_pd(mi, sign);

    const __m256d pr = re[at(k, k)];
    const __m256d pi = im[at(k, k)];

    // Running product, renormalised to keep the exponent out of the mantissa.
    const __m256d nr = _mm256_sub_pd(_mm256_mul_pd(mr, pr), _mm256_mul_pd(mi, pi));
    const __m256d ni = _mm256_add_pd(_mm256_mul_pd(mr, pi), _mm256_mul_pd(mi, pr));
    __m256d s = _mm256_max_pd(abs_pd(nr), abs_pd(ni));
    s = _mm256_blendv_pd(s, one, singular);
    const __m256i e = exponent_bits(s);
    const __m256d scale = inverse_pow2(e);
    mr = _mm256_mul_pd(nr, scale);
    mi = _mm256_mul_pd(ni, scale);
    expo = _mm256_add_epi64(expo, e);

    __m256d ps = _mm256_max_pd(abs_pd(pr), abs_pd(pi));
    ps = _mm256_blendv_pd(ps, one, zero_pivot);
    const __m256d qr = _mm256_div_pd(pr, ps);
    const __m256d qi = _mm256_div_pd(pi, ps);
    const __m256d den = _mm256_mul_pd(_mm256_add_pd(_mm256_mul_pd(qr, qr), _mm256_mul_pd(qi, qi)), ps);
    __m256d inv_r = _mm256_div_pd(qr, den);
    __m256d inv_i = _mm256_div_pd(_mm256_sub_pd(zero, qi), den);
    inv_r = _mm256_blendv_pd(inv_r, zero, zero_pivot);
    inv_i = _mm256_blendv_pd(inv_i, zero, zero_pivot);

    for (int i = k + 1; i < n; ++i) {
      const __m256d ar = re[at(i, k)];
      const __m256d ai = im[at(i, k)];
      const __m256d lr = _mm256_fmsub_pd(ar, inv_r, _mm256_mul_pd(ai, inv_i));
      const __m256d li = _mm256_fmadd_pd(ar, inv_i, _mm256_mul_pd(ai, inv_r));
      for (int j = k + 1; j < n; ++j) {
        const __m256d kr = re[at(k, j)];
        const __m256d ki = im[at(k, j)];
        re[at(i, j)] = _mm256_fnmadd_pd(lr, kr, _mm256_fmadd_pd(li, ki, re[at(i, j)]));
        im[at(i, j)] = _mm256_fnmadd_pd(lr, ki, _mm256_fnmadd_pd(li, kr, im[at(i, j)]));
      }
    }
  }

  alignas(32) std::array<double, kLanes> out_r;
  alignas(32) std::array<double, kLanes> out_i;
  alignas(32) std::array<long long, kLanes> out_e;
  alignas(32) std::array<double, kLanes> out_s;
  _mm256_store_pd(out_r.data(), mr);
  _mm256_store_pd(out_i.data(), mi);
  _mm256_store_si256(reinterpret_cast<__m256i*>(out_e.data()), expo);
  _mm256_store_pd(out_s.data(), singular);
  for (int l = 0; l < kLanes; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    if (out_s[lu] != 0.0) {
      out[l] = ScaledDet{};
    } else {
      out[l] = ScaledDet{{out_r[lu], out_i[lu]}, static_cast<long>(out_e[lu])};
    }
  }
}

}  // namespace

void char_det_batch_avx2(const CharMatrices& mats, std::span<const std::complex<double>> lambdas,
                         std::span<const std::complex<double>> factors, std::span<ScaledDet> out) {
  const auto nn = static_cast<std::size_t>(mats.n) * static_cast<std::size_t>(mats.n);
  const auto m = static_cast<std::size_t>(mats.m);
  if (mats.a0.size() != nn || mats.b.size() != nn * m) {
    throw std::invalid_argument("char_det: matrix storage does not match n, m");
  }
  if (factors.size() != lambdas.size() * m || out.size() < lambdas.size()) {
    throw std::invalid_argument("char_det: factor/output spans do not match lambda count");
  }
  std::vector<__m256d> re;
  std::vector<__m256d> im;
  const std::size_t count = lambdas.size();
  std::size_t k = 0;
  for (; k + kLanes <= count; k += kLanes) {
    det_group(mats, lambdas.data() + k, factors.data() + k * m, out.data() + k, re, im);
  }
  if (k < count) {
    // Pad the tail group by repeating the last point.
    std::array<std::complex<double>, kLanes> lam_pad;
    std::vector<std::complex<double>> fac_pad(kLanes * m);
    std::array<ScaledDet, kLanes> out_pad;
    for (std::size_t l = 0; l < kLanes; ++l) {
      const std::size_t src = std::min(k + l, count - 1);
      lam_pad[l] = lambdas[src];
      for (std::size_t i = 0; i < m; ++i) fac_pad[l * m + i] = factors[src * m + i];
    }
    det_group(mats, lam_pad.data(), fac_pad.data(), out_pad.data(), re, im);
    for (std::size_t l = 0; k + l < count; ++l) out[k + l] = out_pad[l];
  }
}

}  // namespace ddenoc::kernels
