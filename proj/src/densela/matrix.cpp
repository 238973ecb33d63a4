#include "linflow/densela/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "linflow/error.hpp"
#include "linflow/simd/kernels.hpp"

namespace linflow {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidInput(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(rows_ >= 1 && cols_ >= 1, "Matrix: extents must be positive");
  require(data_.size() == rows_ * cols_, "Matrix: data length " + std::to_string(data_.size()) +
                                             " != " + std::to_string(rows_ * cols_));
  for (double v : data_) require(std::isfinite(v), "Matrix: non-finite entry");
}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols) {
  require(rows >= 1 && cols >= 1, "Matrix::zeros: extents must be positive");
  Matrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_.assign(rows * cols, 0.0);
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  require(rows.size() >= 1, "Matrix::from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    require(r.size() == cols, "Matrix::from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Matrix(rows.size(), cols, std::move(data));
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m = zeros(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::transpose() const {
  Matrix t = zeros(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::block(std::size_t row0, std::size_t col0, std::size_t nrows,
                     std::size_t ncols) const {
  require(row0 + nrows <= rows_ && col0 + ncols <= cols_, "Matrix::block: out of range");
  Matrix b = zeros(nrows, ncols);
  for (std::size_t i = 0; i < nrows; ++i) {
    const auto src = row(row0 + i).subspan(col0, ncols);
    std::copy(src.begin(), src.end(), b.row(i).begin());
  }
  return b;
}

std::vector<double> Matrix::col(std::size_t j) const {
  std::vector<double> c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator+");
  Matrix c = a;
  simd::axpy(1.0, b.data(), c.data());
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator-");
  Matrix c = a;
  simd::axpy(-1.0, b.data(), c.data());
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + ")");
  Matrix c = Matrix::zeros(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      if (aip != 0.0) simd::axpy(aip, b.row(p), out);
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: row counts differ");
  Matrix c = Matrix::zeros(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const auto brow = b.row(p);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double api = a(p, i);
      if (api != 0.0) simd::axpy(api, brow, c.row(i));
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  Matrix c = Matrix::zeros(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = simd::dot(a.row(i), b.row(j));
  return c;
}

Matrix scale_rows(std::span<const double> d, const Matrix& a) {
  require(d.size() == a.rows(), "scale_rows: length mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double& v : c.row(i)) v *= d[i];
  return c;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "hstack: row counts differ");
  Matrix c = Matrix::zeros(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), c.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(), c.row(i).begin() + a.cols());
  }
  return c;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "vstack: column counts differ");
  Matrix c = Matrix::zeros(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), c.data().begin());
  std::copy(b.data().begin(), b.data().end(), c.data().begin() + a.size());
  return c;
}

double frobenius_sq(const Matrix& a) { return simd::sum_sq(a.data()); }

double trace(const Matrix& a) {
  require(a.rows() == a.cols(), "trace: matrix is not square");
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double asymmetry(const Matrix& a) {
  require(a.rows() == a.cols(), "asymmetry: matrix is not square");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double d = a(i, j) - a(j, i);
      acc += d * d;
    }
  return std::sqrt(acc);
}

}  // namespace linflow
