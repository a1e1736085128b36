// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrices plus the handful of factorizations the rest of the
// toolkit needs: Cholesky, triangular solves and ridge least squares.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gplasdi {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  DenseMatrix transposed() const;
  double frobenius_norm() const;
  double squared_norm() const;
  bool all_finite() const;
  void fill(double value);

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double s);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

enum class Transpose { kNo, kYes };

/// c = alpha * op(a) * op(b) + beta * c. `c` is resized when beta == 0.
void gemm(const DenseMatrix& a, Transpose ta, const DenseMatrix& b, Transpose tb,
          DenseMatrix& c, double alpha = 1.0, double beta = 0.0);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Lower-triangular L with A = L Lᵀ. Throws NotPositiveDefinite on a
/// non-positive pivot and InvalidArgument if A is not symmetric.
DenseMatrix cholesky(const DenseMatrix& a);

/// Solves (L Lᵀ) X = B given the Cholesky factor L.
DenseMatrix cholesky_solve(const DenseMatrix& lower, const DenseMatrix& rhs);

/// Solves L X = B (forward substitution).
DenseMatrix solve_lower(const DenseMatrix& lower, const DenseMatrix& rhs);

/// argmin_X ‖AX − B‖² + ridge‖X‖² via the normal equations. Throws
/// SingularSystem when a Cholesky pivot drops below 1e-12 × max diagonal.
DenseMatrix solve_least_squares(const DenseMatrix& a, const DenseMatrix& b, double ridge);

}  // namespace gplasdi
