#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace alcorpus {

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);

/// Largest absolute entry of a - b; shapes must match.
double max_abs_difference(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Eigenvalues are sorted
/// descending; each eigenvector is signed so its largest-magnitude component
/// is nonnegative (first such component on ties).
SymmetricEigen symmetric_eigen(const Matrix& symmetric);

/// Lower-triangular L with L L^T = a. Throws NumericalError if a is not
/// positive definite.
Matrix cholesky(const Matrix& a);

/// Solves L y = b in place for lower-triangular L.
void forward_substitute(const Matrix& lower, std::span<double> b);

}  // namespace alcorpus
