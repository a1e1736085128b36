// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/linalg.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "gplasdi/errors.hpp"

namespace gplasdi {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const DenseMatrix& m) { return {m.data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }
MutMap view(DenseMatrix& m) { return {m.data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(what) + ": " + shape(a) + " vs " + shape(b));
  }
}

// Shared Cholesky kernel. Pivots at or below `min_pivot` are rejected.
template <class OnFail>
DenseMatrix factor(const DenseMatrix& a, double min_pivot, OnFail&& on_fail) {
  const std::size_t n = a.rows();
  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > min_pivot)) on_fail(j, diag);
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionMismatch("DenseMatrix: data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionMismatch("from_rows: ragged initializer");
    data.insert(data.end(), row.begin(), row.end());
  }
  return {r, c, std::move(data)};
}

DenseMatrix DenseMatrix::column(std::span<const double> values) {
  return {values.size(), 1, std::vector<double>(values.begin(), values.end())};
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double DenseMatrix::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

double DenseMatrix::frobenius_norm() const { return std::sqrt(squared_norm()); }

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void DenseMatrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

void gemm(const DenseMatrix& a, Transpose ta, const DenseMatrix& b, Transpose tb,
          DenseMatrix& c, double alpha, double beta) {
  const std::size_t m = ta == Transpose::kNo ? a.rows() : a.cols();
  const std::size_t ka = ta == Transpose::kNo ? a.cols() : a.rows();
  const std::size_t kb = tb == Transpose::kNo ? b.rows() : b.cols();
  const std::size_t n = tb == Transpose::kNo ? b.cols() : b.rows();
  if (ka != kb) throw DimensionMismatch("gemm: inner dimensions " + shape(a) + " and " + shape(b));
  if (beta == 0.0) {
    if (c.rows() != m || c.cols() != n) c = DenseMatrix(m, n);
  } else if (c.rows() != m || c.cols() != n) {
    throw DimensionMismatch("gemm: accumulator has shape " + shape(c));
  }
  auto out = view(c);
  const auto av = view(a);
  const auto bv = view(b);
  if (beta == 0.0) {
    out.setZero();
  } else if (beta != 1.0) {
    out *= beta;
  }
  if (ta == Transpose::kNo && tb == Transpose::kNo) {
    out.noalias() += alpha * av * bv;
  } else if (ta == Transpose::kYes && tb == Transpose::kNo) {
    out.noalias() += alpha * av.transpose() * bv;
  } else if (ta == Transpose::kNo && tb == Transpose::kYes) {
    out.noalias() += alpha * av * bv.transpose();
  } else {
    out.noalias() += alpha * av.transpose() * bv.transpose();
  }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c;
  gemm(a, Transpose::kNo, b, Transpose::kNo, c);
  return c;
}

DenseMatrix cholesky(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: matrix is " + shape(a));
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (double v : a.values()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-10 * scale) {
        throw InvalidArgument("cholesky: matrix is not symmetric at (" + std::to_string(i) +
                              "," + std::to_string(j) + ")");
      }
  return factor(a, 0.0, [](std::size_t j, double pivot) {
    throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) + " is " +
                              std::to_string(pivot));
  });
}

DenseMatrix solve_lower(const DenseMatrix& lower, const DenseMatrix& rhs) {
  const std::size_t n = lower.rows();
  if (rhs.rows() != n) throw DimensionMismatch("solve_lower: rhs has " + shape(rhs));
  DenseMatrix x = rhs;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x(k, c);
      x(i, c) = s / lower(i, i);
    }
  }
  return x;
}

DenseMatrix cholesky_solve(const DenseMatrix& lower, const DenseMatrix& rhs) {
  const std::size_t n = lower.rows();
  DenseMatrix x = solve_lower(lower, rhs);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x(k, c);
      x(ii, c) = s / lower(ii, ii);
    }
  }
  return x;
}

DenseMatrix solve_least_squares(const DenseMatrix& a, const DenseMatrix& b, double ridge) {
  if (a.rows() != b.rows()) {
    throw DimensionMismatch("solve_least_squares: A is " + shape(a) + ", B is " + shape(b));
  }
  if (a.rows() == 0 || a.cols() == 0) throw InvalidArgument("solve_least_squares: empty system");
  if (!(ridge >= 0.0)) throw InvalidArgument("solve_least_squares: ridge must be >= 0");

  DenseMatrix normal;
  gemm(a, Transpose::kYes, a, Transpose::kNo, normal);
  for (std::size_t i = 0; i < normal.rows(); ++i) normal(i, i) += ridge;
  DenseMatrix rhs;
  gemm(a, Transpose::kYes, b, Transpose::kNo, rhs);

  double max_diag = 0.0;
  for (std::size_t i = 0; i < normal.rows(); ++i) max_diag = std::max(max_diag, normal(i, i));
  const DenseMatrix l = factor(normal, 1e-12 * max_diag, [](std::size_t j, double pivot) {
    throw SingularSystem("solve_least_squares: pivot " + std::to_string(j) + " is " +
                         std::to_string(pivot));
  });
  return cholesky_solve(l, rhs);
}

}  // namespace gplasdi
