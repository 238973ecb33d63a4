#include <cmath>
#include <vector>

#include "doctest.h"
#include "linflow/error.hpp"
#include "linflow/rng.hpp"
#include "linflow/simd/kernels.hpp"

using namespace linflow;

namespace {

std::vector<simd::Isa> available() {
  std::vector<simd::Isa> out;
  for (auto isa : {simd::Isa::scalar, simd::Isa::avx2, simd::Isa::neon}) {
    if (simd::supported(isa)) out.push_back(isa);
  }
  return out;
}

std::vector<double> draw(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar variant is always present and active one is supported") {
    CHECK(simd::supported(simd::Isa::scalar));
    CHECK(simd::supported(simd::active().isa));
    CHECK(simd::table(simd::Isa::scalar).isa == simd::Isa::scalar);
  }

  TEST_CASE("unsupported variant is rejected") {
    for (auto isa : {simd::Isa::avx2, simd::Isa::neon}) {
      if (!simd::supported(isa)) CHECK_THROWS_AS(simd::table(isa), InvalidInput);
    }
  }

  TEST_CASE("scalar kernels on hand values") {
    const auto& k = simd::table(simd::Isa::scalar);
    const double a[] = {1, 2, 3}, b[] = {4, -5, 6};
    CHECK(k.dot(a, b, 3) == doctest::Approx(12.0));
    CHECK(k.sum_sq(a, 3) == doctest::Approx(14.0));
    double y[] = {1, 1, 1};
    k.axpy(2.0, a, y, 3);
    CHECK(y[2] == 7.0);
    k.axpby(1.0, a, -1.0, y, 3);
    CHECK(y[0] == -2.0);
    double x[] = {1, 0}, z[] = {0, 1};
    k.rotate(x, z, 0.0, 1.0, 2);
    CHECK(x[0] == 0.0);
    CHECK(z[0] == 1.0);
    CHECK(x[1] == -1.0);
  }

  TEST_CASE("every variant matches scalar for lengths 0..67") {
    const auto& ref = simd::table(simd::Isa::scalar);
    for (auto isa : available()) {
      const auto& k = simd::table(isa);
      for (std::size_t n = 0; n <= 67; ++n) {
        const auto a = draw(n, 10 + n), b = draw(n, 500 + n);
        const double tol = 1e-13 * (1.0 + static_cast<double>(n));
        CHECK(std::abs(k.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol);
        CHECK(std::abs(k.sum_sq(a.data(), n) - ref.sum_sq(a.data(), n)) <= tol);

        auto y1 = b, y2 = b;
        k.axpy(0.37, a.data(), y1.data(), n);
        ref.axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y2[i])));

        y1 = b;
        y2 = b;
        k.axpby(-1.25, a.data(), 0.5, y1.data(), n);
        ref.axpby(-1.25, a.data(), 0.5, y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y2[i])));

        auto x1 = a, x2 = a;
        y1 = b;
        y2 = b;
        const double c = std::cos(0.3), s = std::sin(0.3);
        k.rotate(x1.data(), y1.data(), c, s, n);
        ref.rotate(x2.data(), y2.data(), c, s, n);
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(std::abs(x1[i] - x2[i]) <= 1e-15 * (1 + std::abs(x2[i])));
          CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y2[i])));
        }
      }
    }
  }

  TEST_CASE("kernels leave memory past n untouched") {
    for (auto isa : available()) {
      const auto& k = simd::table(isa);
      std::vector<double> x(20, 1.0), y(20, 2.0);
      k.axpy(1.0, x.data(), y.data(), 13);
      CHECK(y[12] == 3.0);
      CHECK(y[13] == 2.0);
      k.rotate(x.data(), y.data(), 0.0, 1.0, 5);
      CHECK(x[5] == 1.0);
      CHECK(y[5] == 3.0);
    }
  }
}
