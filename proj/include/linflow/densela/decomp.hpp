#pragma once

#include <cstddef>
#include <vector>

#include "linflow/densela/matrix.hpp"

namespace linflow {

// Singular values below this fraction of the largest are treated as zero by
// pinv and psd_power unless the caller passes its own tolerance.
inline constexpr double kDefaultRankTol = 1e-12;
inline constexpr std::size_t kJacobiSweepCap = 100;

// a = left * diag(singular_values) * right^T with k = min(rows, cols).
struct ThinSvd {
  Matrix left;                          // rows x k, orthonormal columns
  std::vector<double> singular_values;  // nonincreasing, >= 0
  Matrix right;                         // cols x k, orthonormal columns
};

struct SymEig {
  std::vector<double> eigenvalues;  // nonincreasing
  Matrix eigenvectors;              // column i pairs with eigenvalues[i]
};

struct QrThin {
  Matrix q;  // rows x cols, orthonormal columns
  Matrix r;  // cols x cols, upper triangular with nonnegative diagonal
};

enum class NormKind { frobenius, spectral };

// One-sided (Hestenes) Jacobi. Throws NotConverged after kJacobiSweepCap sweeps.
ThinSvd svd_thin(const Matrix& a);

// Cyclic two-sided Jacobi. Rejects inputs with ||a - a^T||_F > 1e-10 ||a||_F.
SymEig sym_eig_desc(const Matrix& a);

Matrix pinv(const Matrix& a, double rank_tol = kDefaultRankTol);

// a^p for symmetric PSD a. Eigenvalues in [-1e-10 ||a||_2, 0) are clipped to
// zero; more negative ones are rejected, as is p < 0 on a singular input.
Matrix psd_power(const Matrix& a, double p, double rank_tol = kDefaultRankTol);

double norm(const Matrix& a, NormKind kind);

// Householder QR; requires rows >= cols.
QrThin qr_thin(const Matrix& a);

// Given q (n x k) with orthonormal columns and k < n, an n x (n - k) matrix
// whose columns complete q to an orthonormal basis of R^n.
Matrix orthonormal_complement(const Matrix& q);

}  // namespace linflow
