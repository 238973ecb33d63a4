#pragma once

// Vector kernels used by every dense inner loop in the library.
//
// Each kernel has a scalar reference implementation and, where the target
// supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The variant is
// picked once at first use from CPUID, and can be pinned with the environment
// variable LINFLOW_SIMD=scalar|avx2|neon. Variants agree with the scalar
// reference up to reassociation of floating-point sums.

#include <cstddef>
#include <span>
#include <string_view>

namespace linflow::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i]^2
  double (*sum_sq)(const double* a, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[i] = alpha * x[i] + beta * y[i]
  void (*axpby)(double alpha, const double* x, double beta, double* y, std::size_t n);
  // x[i], y[i] <- c*x[i] - s*y[i], s*x[i] + c*y[i]
  void (*rotate)(double* x, double* y, double c, double s, std::size_t n);
};

std::string_view isa_name(Isa isa) noexcept;

// True when the variant was compiled in and the running CPU supports it.
bool supported(Isa isa) noexcept;

// The table for a specific variant; throws InvalidInput when unsupported.
const KernelTable& table(Isa isa);

// The table selected for this process.
const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double sum_sq(std::span<const double> a) {
  return active().sum_sq(a.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void axpby(double alpha, std::span<const double> x, double beta,
                  std::span<double> y) {
  active().axpby(alpha, x.data(), beta, y.data(), x.size());
}

inline void rotate(std::span<double> x, std::span<double> y, double c, double s) {
  active().rotate(x.data(), y.data(), c, s, x.size());
}

namespace detail {
const KernelTable& scalar_table() noexcept;
#if defined(LINFLOW_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(LINFLOW_HAVE_NEON)
const KernelTable& neon_table() noexcept;
#endif
}  // namespace detail

}  // namespace linflow::simd
