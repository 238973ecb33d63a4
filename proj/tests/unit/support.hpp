#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "linflow/densela/matrix.hpp"
#include "linflow/rng.hpp"

namespace testing {

using linflow::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            double sd = 1.0) {
  linflow::Rng rng(seed);
  return rng.normal_matrix(rows, cols, sd);
}

inline double fro_dist(const Matrix& a, const Matrix& b) {
  return std::sqrt(linflow::frobenius_sq(a - b));
}

inline double fro(const Matrix& a) { return std::sqrt(linflow::frobenius_sq(a)); }

// Naive triple loop, kept separate from the library product.
inline Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::zeros(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<double>(acc);
    }
  return out;
}

// Eigenvalues of a symmetric matrix by classical (largest off-diagonal first)
// Jacobi in long double, descending.
inline std::vector<double> oracle_sym_eigenvalues(const Matrix& s) {
  const std::size_t n = s.rows();
  std::vector<long double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = 0.5L * (s(i, j) + s(j, i));
  for (int iter = 0; iter < 100000 && n > 1; ++iter) {
    std::size_t p = 0, q = 1;
    long double best = 0.0L;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (std::fabs(a[i * n + j]) > best) {
          best = std::fabs(a[i * n + j]);
          p = i;
          q = j;
        }
    long double diag = 0.0L;
    for (std::size_t i = 0; i < n; ++i) diag = std::max(diag, std::fabs(a[i * n + i]));
    if (best <= 1e-30L * std::max(diag, 1e-300L)) break;
    const long double theta = (a[q * n + q] - a[p * n + p]) / (2.0L * a[p * n + q]);
    const long double t = (theta >= 0 ? 1.0L : -1.0L) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
    const long double c = 1.0L / std::sqrt(t * t + 1.0L), sn = t * c;
    for (std::size_t k = 0; k < n; ++k) {
      const long double akp = a[k * n + p], akq = a[k * n + q];
      a[k * n + p] = c * akp - sn * akq;
      a[k * n + q] = sn * akp + c * akq;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const long double apk = a[p * n + k], aqk = a[q * n + k];
      a[p * n + k] = c * apk - sn * aqk;
      a[q * n + k] = sn * apk + c * aqk;
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(a[i * n + i]);
  std::sort(out.rbegin(), out.rend());
  return out;
}

// Singular values from the oracle eigenvalues of the smaller Gram matrix.
inline std::vector<double> oracle_singular_values(const Matrix& a) {
  const Matrix at = a.transpose();
  const Matrix g = a.rows() <= a.cols() ? naive_product(a, at) : naive_product(at, a);
  auto ev = oracle_sym_eigenvalues(g);
  for (double& v : ev) v = std::sqrt(std::max(v, 0.0));
  return ev;
}

// Central finite difference of f along direction e_ij of m.
inline double central_difference(const std::function<double(const Matrix&)>& f, Matrix m,
                                 std::size_t i, std::size_t j, double step) {
  const double x = m(i, j);
  m(i, j) = x + step;
  const double up = f(m);
  m(i, j) = x - step;
  const double down = f(m);
  return (up - down) / (2.0 * step);
}

}  // namespace testing
