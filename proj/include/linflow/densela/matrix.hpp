#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace linflow {

// Dense real matrix, row-major. A regular value type: copies are deep and
// every free function below returns a fresh result.
class Matrix {
 public:
  Matrix() = default;

  // Throws InvalidInput on zero extents, size mismatch or non-finite entries.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix zeros(std::size_t rows, std::size_t cols);
  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix diagonal(std::span<const double> diag);
  // rows x 1
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transpose() const;
  Matrix block(std::size_t row0, std::size_t col0, std::size_t nrows, std::size_t ncols) const;
  Matrix col_range(std::size_t col0, std::size_t ncols) const {
    return block(0, col0, rows_, ncols);
  }
  std::vector<double> col(std::size_t j) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix operator*(const Matrix& a, const Matrix& b);

// a^T b and a b^T without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// diag(d) * a, i.e. row i scaled by d[i].
Matrix scale_rows(std::span<const double> d, const Matrix& a);

Matrix hstack(const Matrix& a, const Matrix& b);
Matrix vstack(const Matrix& a, const Matrix& b);

double frobenius_sq(const Matrix& a);
double trace(const Matrix& a);
double max_abs(const Matrix& a);

// ||a - a^T||_F; requires square a.
double asymmetry(const Matrix& a);

}  // namespace linflow
