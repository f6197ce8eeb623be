#include "ddenoc/char_det.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace ddenoc::kernels {

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool avx2_available() {
#if defined(DDENOC_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() {
  static const Isa isa = [] {
    const char* env = std::getenv("DDENOC_SIMD");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::scalar;
    return avx2_available() ? Isa::avx2 : Isa::scalar;
  }();
  return isa;
}

#if !defined(DDENOC_BUILD_AVX2)
void char_det_batch_avx2(const CharMatrices&, std::span<const std::complex<double>>,
                         std::span<const std::complex<double>>, std::span<ScaledDet>) {
  throw std::logic_error("AVX2 kernel not compiled in");
}
#endif

void char_det_batch(const CharMatrices& mats, std::span<const std::complex<double>> lambdas,
                    std::span<const std::complex<double>> factors, std::span<ScaledDet> out, Isa isa) {
  if (isa == Isa::avx2 && avx2_available()) {
    char_det_batch_avx2(mats, lambdas, factors, out);
  } else {
    char_det_batch_scalar(mats, lambdas, factors, out);
  }
}

void char_det_batch(const CharMatrices& mats, std::span<const std::complex<double>> lambdas,
                    std::span<const std::complex<double>> factors, std::span<ScaledDet> out) {
  char_det_batch(mats, lambdas, factors, out, active_isa());
}

}  // namespace ddenoc::kernels
