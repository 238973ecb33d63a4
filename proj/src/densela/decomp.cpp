#include "linflow/densela/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "linflow/error.hpp"
#include "linflow/simd/kernels.hpp"

namespace linflow {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::vector<std::size_t> descending_order(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] > values[j]; });
  return order;
}

// Householder reflectors for the columns of a (stored transposed so each
// column is a contiguous row of `cols`). Reflector j is zero on entries < j.
struct Reflectors {
  Matrix vecs;  // k x n
  std::vector<double> vnorm_sq;
};

Reflectors householder(Matrix& cols) {
  const std::size_t k = cols.rows();
  const std::size_t n = cols.cols();
  Reflectors h{Matrix::zeros(k, n), std::vector<double>(k, 0.0)};
  for (std::size_t j = 0; j < k; ++j) {
    auto x = cols.row(j).subspan(j);
    const double xnorm = std::sqrt(simd::sum_sq(x));
    if (xnorm == 0.0) continue;
    const double alpha = x[0] >= 0.0 ? -xnorm : xnorm;
    auto v = h.vecs.row(j).subspan(j);
    std::copy(x.begin(), x.end(), v.begin());
    v[0] -= alpha;
    const double vv = simd::sum_sq(v);
    if (vv == 0.0) continue;
    h.vnorm_sq[j] = vv;
    for (std::size_t c = j; c < k; ++c) {
      auto col = cols.row(c).subspan(j);
      simd::axpy(-2.0 * simd::dot(v, col) / vv, v, col);
    }
  }
  return h;
}

// x <- H_0 H_1 ... H_{k-1} x
void apply_reflectors(const Reflectors& h, std::span<double> x) {
  for (std::size_t j = h.vnorm_sq.size(); j-- > 0;) {
    if (h.vnorm_sq[j] == 0.0) continue;
    auto v = h.vecs.row(j).subspan(j);
    auto xs = x.subspan(j);
    simd::axpy(-2.0 * simd::dot(v, xs) / h.vnorm_sq[j], v, xs);
  }
}

}  // namespace

ThinSvd svd_thin(const Matrix& a) {
  if (a.rows() < a.cols()) {
    ThinSvd t = svd_thin(a.transpose());
    return ThinSvd{std::move(t.right), std::move(t.singular_values), std::move(t.left)};
  }
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();

  Matrix work = a.transpose();  // row j holds column j of a
  Matrix vt = Matrix::identity(k);
  std::vector<double> norms(k);
  for (std::size_t j = 0; j < k; ++j) norms[j] = simd::sum_sq(work.row(j));
  const double fro2 = std::accumulate(norms.begin(), norms.end(), 0.0);

  // Pairs whose cosine is below this are considered orthogonal; columns
  // whose squared norm is below `negligible` are treated as exact zeros.
  const double cos_tol = std::max(1e-15, static_cast<double>(n) * kEps);
  const double negligible = 1e-30 * fro2;

  std::size_t sweep = 0;
  for (; sweep < kJacobiSweepCap; ++sweep) {
    bool rotated = false;
    for (std::size_t j = 0; j + 1 < k; ++j) {
      for (std::size_t l = j + 1; l < k; ++l) {
        const double alpha = norms[j];
        const double beta = norms[l];
        if (alpha <= negligible || beta <= negligible) continue;
        const double gamma = simd::dot(work.row(j), work.row(l));
        if (std::abs(gamma) <= cos_tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t =
            std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        simd::rotate(work.row(j), work.row(l), c, s);
        simd::rotate(vt.row(j), vt.row(l), c, s);
        norms[j] = simd::sum_sq(work.row(j));
        norms[l] = simd::sum_sq(work.row(l));
      }
    }
    if (!rotated) break;
  }
  if (sweep == kJacobiSweepCap) throw NotConverged("svd_thin: one-sided Jacobi", sweep);

  std::vector<double> sigma(k);
  for (std::size_t j = 0; j < k; ++j) sigma[j] = std::sqrt(norms[j]);
  const auto order = descending_order(sigma);
  const double sigma_max = k > 0 ? sigma[order[0]] : 0.0;

  ThinSvd out{Matrix::zeros(n, k), std::vector<double>(k), Matrix::zeros(k, k)};
  std::vector<std::size_t> missing;
  for (std::size_t idx = 0; idx < k; ++idx) {
    const std::size_t j = order[idx];
    out.singular_values[idx] = sigma[j];
    for (std::size_t i = 0; i < k; ++i) out.right(i, idx) = vt(j, i);
    if (sigma_max > 0.0 && sigma[j] > 1e-14 * sigma_max) {
      const double inv = 1.0 / sigma[j];
      for (std::size_t i = 0; i < n; ++i) out.left(i, idx) = work(j, i) * inv;
    } else {
      missing.push_back(idx);
    }
  }
  if (!missing.empty()) {
    // Null directions: any orthonormal completion of the accepted columns.
    const std::size_t accepted = k - missing.size();
    Matrix fill;
    if (accepted == 0) {
      fill = Matrix::identity(n);
    } else {
      Matrix q = Matrix::zeros(n, accepted);
      std::size_t c = 0;
      for (std::size_t idx = 0; idx < k; ++idx) {
        if (std::find(missing.begin(), missing.end(), idx) != missing.end()) continue;
        for (std::size_t i = 0; i < n; ++i) q(i, c) = out.left(i, idx);
        ++c;
      }
      fill = orthonormal_complement(q);
    }
    for (std::size_t m = 0; m < missing.size(); ++m)
      for (std::size_t i = 0; i < n; ++i) out.left(i, missing[m]) = fill(i, m);
  }
  return out;
}

SymEig sym_eig_desc(const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidInput("sym_eig_desc: matrix is not square");
  const std::size_t n = a.rows();
  const double fro = std::sqrt(frobenius_sq(a));
  const double asym = asymmetry(a);
  if (asym > 1e-10 * fro) {
    std::ostringstream msg;
    msg << "sym_eig_desc: input is not symmetric, ||A - A^T||_F = " << asym
        << " exceeds 1e-10 * ||A||_F = " << 1e-10 * fro;
    throw InvalidInput(msg.str());
  }
  Matrix w = a;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) w(i, j) = w(j, i) = 0.5 * (a(i, j) + a(j, i));
  Matrix vt = Matrix::identity(n);

  std::size_t sweep = 0;
  for (; sweep < kJacobiSweepCap; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += w(p, q) * w(p, q);
    if (off == 0.0 || std::sqrt(2.0 * off) <= 1e-17 * fro) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = w(p, q);
        if (apq == 0.0) continue;
        const double g = 100.0 * std::abs(apq);
        if (std::abs(w(p, p)) + g == std::abs(w(p, p)) &&
            std::abs(w(q, q)) + g == std::abs(w(q, q))) {
          w(p, q) = w(q, p) = 0.0;
          continue;
        }
        const double theta = (w(q, q) - w(p, p)) / (2.0 * apq);
        const double t =
            std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double xp = w(r, p);
          const double xq = w(r, q);
          w(r, p) = c * xp - s * xq;
          w(r, q) = s * xp + c * xq;
        }
        simd::rotate(w.row(p), w.row(q), c, s);
        w(p, q) = w(q, p) = 0.0;
        simd::rotate(vt.row(p), vt.row(q), c, s);
      }
    }
  }
  if (sweep == kJacobiSweepCap) throw NotConverged("sym_eig_desc: cyclic Jacobi", sweep);

  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = w(i, i);
  const auto order = descending_order(diag);
  SymEig out{std::vector<double>(n), Matrix::zeros(n, n)};
  for (std::size_t idx = 0; idx < n; ++idx) {
    out.eigenvalues[idx] = diag[order[idx]];
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, idx) = vt(order[idx], i);
  }
  return out;
}

Matrix pinv(const Matrix& a, double rank_tol) {
  if (!(rank_tol > 0.0)) throw InvalidInput("pinv: rank_tol must be positive");
  const ThinSvd s = svd_thin(a);
  const double cutoff = rank_tol * (s.singular_values.empty() ? 0.0 : s.singular_values[0]);
  Matrix out = Matrix::zeros(a.cols(), a.rows());
  for (std::size_t idx = 0; idx < s.singular_values.size(); ++idx) {
    const double sv = s.singular_values[idx];
    if (sv <= cutoff || sv == 0.0) continue;
    const double inv = 1.0 / sv;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double vi = s.right(i, idx) * inv;
      if (vi == 0.0) continue;
      auto row = out.row(i);
      for (std::size_t j = 0; j < a.rows(); ++j) row[j] += vi * s.left(j, idx);
    }
  }
  return out;
}

Matrix psd_power(const Matrix& a, double p, double rank_tol) {
  const SymEig eig = sym_eig_desc(a);
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (double l : eig.eigenvalues) scale = std::max(scale, std::abs(l));

  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    double l = eig.eigenvalues[i];
    if (l < 0.0) {
      if (l < -1e-10 * scale) {
        std::ostringstream msg;
        msg << "psd_power: eigenvalue " << l << " is negative beyond tolerance "
            << -1e-10 * scale;
        throw InvalidInput(msg.str());
      }
      l = 0.0;
    }
    if (p < 0.0 && !(l > rank_tol * scale)) {
      std::ostringstream msg;
      msg << "psd_power: negative power " << p << " of a singular matrix (eigenvalue " << l
          << " <= " << rank_tol * scale << ")";
      throw InvalidInput(msg.str());
    }
    f[i] = (p == 0.0) ? 1.0 : (l == 0.0 ? 0.0 : std::pow(l, p));
  }

  Matrix out = Matrix::zeros(n, n);
  const Matrix& v = eig.eigenvectors;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += v(i, k) * f[k] * v(j, k);
      out(i, j) = out(j, i) = acc;
    }
  }
  return out;
}

double norm(const Matrix& a, NormKind kind) {
  if (kind == NormKind::frobenius) return std::sqrt(frobenius_sq(a));
  if (a.rows() == 1 || a.cols() == 1) return std::sqrt(frobenius_sq(a));
  return svd_thin(a).singular_values.front();
}

QrThin qr_thin(const Matrix& a) {
  if (a.rows() < a.cols()) throw InvalidInput("qr_thin: requires rows >= cols");
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  Matrix cols = a.transpose();
  const Reflectors h = householder(cols);

  QrThin out{Matrix::zeros(n, k), Matrix::zeros(k, k)};
  std::vector<double> e(n);
  for (std::size_t j = 0; j < k; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    apply_reflectors(h, e);
    // Flip signs so that diag(R) >= 0.
    const double sign = cols(j, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.q(i, j) = sign * e[i];
    for (std::size_t c = j; c < k; ++c) out.r(j, c) = sign * cols(c, j);
  }
  return out;
}

Matrix orthonormal_complement(const Matrix& q) {
  const std::size_t n = q.rows();
  const std::size_t k = q.cols();
  if (k >= n) throw InvalidInput("orthonormal_complement: q already spans R^n");
  Matrix cols = q.transpose();
  const Reflectors h = householder(cols);
  Matrix out = Matrix::zeros(n, n - k);
  std::vector<double> e(n);
  for (std::size_t j = k; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    apply_reflectors(h, e);
    for (std::size_t i = 0; i < n; ++i) out(i, j - k) = e[i];
  }
  return out;
}

}  // namespace linflow
