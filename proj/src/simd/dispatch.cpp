#include <cstdlib>
#include <iostream>
#include <string>

#include "linflow/error.hpp"
#include "linflow/simd/kernels.hpp"

namespace linflow::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(LINFLOW_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& best_available() noexcept {
#if defined(LINFLOW_HAVE_AVX2)
  if (cpu_has_avx2()) return detail::avx2_table();
#endif
#if defined(LINFLOW_HAVE_NEON)
  return detail::neon_table();
#endif
  return detail::scalar_table();
}

const KernelTable& select() noexcept {
  const char* env = std::getenv("LINFLOW_SIMD");
  if (env == nullptr || *env == '\0') return best_available();
  const std::string want(env);
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (want == isa_name(isa)) {
      if (supported(isa)) return table(isa);
      std::cerr << "linflow: LINFLOW_SIMD=" << want
                << " is not supported here; using the best available variant\n";
      return best_available();
    }
  }
  std::cerr << "linflow: unknown LINFLOW_SIMD value '" << want << "'\n";
  return best_available();
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

bool supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return cpu_has_avx2();
    case Isa::neon:
#if defined(LINFLOW_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw InvalidInput("SIMD variant '" + std::string(isa_name(isa)) +
                       "' is not available on this build/CPU");
  }
  switch (isa) {
#if defined(LINFLOW_HAVE_AVX2)
    case Isa::avx2:
      return detail::avx2_table();
#endif
#if defined(LINFLOW_HAVE_NEON)
    case Isa::neon:
      return detail::neon_table();
#endif
    default:
      return detail::scalar_table();
  }
}

const KernelTable& active() noexcept {
  static const KernelTable& chosen = select();
  return chosen;
}

}  // namespace linflow::simd
