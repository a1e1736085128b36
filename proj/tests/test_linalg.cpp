// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "gplasdi/errors.hpp"
#include "gplasdi/linalg.hpp"

using namespace gplasdi;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

DenseMatrix random_spd(std::size_t n, std::mt19937_64& rng) {
  const DenseMatrix a = random_matrix(n, n, rng);
  DenseMatrix s;
  gemm(a, Transpose::kYes, a, Transpose::kNo, s);
  for (std::size_t i = 0; i < n; ++i) s(i, i) += static_cast<double>(n);
  return s;
}

}  // namespace

TEST_CASE("least squares on the identity returns the right-hand side") {
  const DenseMatrix x =
      solve_least_squares(DenseMatrix::identity(2), DenseMatrix::from_rows({{3}, {4}}), 0.0);
  CHECK(x(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(x(1, 0) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("least squares with a column of ones gives the mean") {
  const DenseMatrix x =
      solve_least_squares(DenseMatrix::from_rows({{1}, {1}}), DenseMatrix::from_rows({{1}, {3}}), 0.0);
  CHECK(x(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("ridge least squares matches an explicit 2x2 inverse") {
  const DenseMatrix a = DenseMatrix::from_rows({{1, 0}, {0, 1}, {1, 1}});
  const DenseMatrix b = DenseMatrix::from_rows({{1}, {1}, {3}});
  const double ridge = 0.5;

  // Oracle: form AᵀA + ridge·I and AᵀB by hand, invert the 2x2 explicitly.
  double n00 = 0, n01 = 0, n11 = 0, r0 = 0, r1 = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    n00 += a(k, 0) * a(k, 0);
    n01 += a(k, 0) * a(k, 1);
    n11 += a(k, 1) * a(k, 1);
    r0 += a(k, 0) * b(k, 0);
    r1 += a(k, 1) * b(k, 0);
  }
  n00 += ridge;
  n11 += ridge;
  const double det = n00 * n11 - n01 * n01;
  const double x0 = (n11 * r0 - n01 * r1) / det;
  const double x1 = (-n01 * r0 + n00 * r1) / det;

  const DenseMatrix x = solve_least_squares(a, b, ridge);
  CHECK(std::abs(x(0, 0) - x0) < 1e-10);
  CHECK(std::abs(x(1, 0) - x1) < 1e-10);
  CHECK(std::abs(x0 - 8.0 / 7.0) < 1e-14);
}

TEST_CASE("least squares rejects mismatched rows and rank deficiency") {
  CHECK_THROWS_AS(solve_least_squares(DenseMatrix(3, 2), DenseMatrix(2, 1), 0.0), DimensionMismatch);
  const DenseMatrix rank1 = DenseMatrix::from_rows({{1, 2}, {2, 4}, {3, 6}});
  CHECK_THROWS_AS(solve_least_squares(rank1, DenseMatrix(3, 1, 1.0), 0.0), SingularSystem);
  CHECK_NOTHROW(solve_least_squares(rank1, DenseMatrix(3, 1, 1.0), 1e-3));
}

TEST_CASE("cholesky examples") {
  const DenseMatrix l1 = cholesky(DenseMatrix::from_rows({{4, 0}, {0, 9}}));
  CHECK(l1 == DenseMatrix::from_rows({{2, 0}, {0, 3}}));
  const DenseMatrix l2 = cholesky(DenseMatrix::from_rows({{4, 2}, {2, 5}}));
  CHECK(l2 == DenseMatrix::from_rows({{2, 0}, {1, 2}}));
  CHECK(matmul(l2, l2.transposed()) == DenseMatrix::from_rows({{4, 2}, {2, 5}}));
  CHECK_THROWS_AS(cholesky(DenseMatrix::from_rows({{1, 2}, {2, 1}})), NotPositiveDefinite);
  CHECK_THROWS_AS(cholesky(DenseMatrix::from_rows({{1, 2}, {0, 1}})), InvalidArgument);
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
  std::mt19937_64 rng(7);
  for (std::size_t n = 1; n <= 20; ++n) {
    const DenseMatrix a = random_spd(n, rng);
    const DenseMatrix l = cholesky(a);
    const DenseMatrix diff = matmul(l, l.transposed()) - a;
    CHECK(diff.frobenius_norm() / a.frobenius_norm() < 1e-10);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) CHECK(l(i, j) == 0.0);
  }
}

TEST_CASE("least squares normal-equation residual vanishes on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t m = 8 + trial, n = 1 + trial % 6, k = 1 + trial % 3;
    const double ridge = (trial % 2) ? 0.0 : 0.3;
    const DenseMatrix a = random_matrix(m, n, rng);
    const DenseMatrix b = random_matrix(m, k, rng);
    const DenseMatrix x = solve_least_squares(a, b, ridge);
    DenseMatrix atb;
    gemm(a, Transpose::kYes, b, Transpose::kNo, atb);
    DenseMatrix res;
    gemm(a, Transpose::kYes, matmul(a, x), Transpose::kNo, res);
    res += ridge * x;
    res -= atb;
    CHECK(res.frobenius_norm() < 1e-8 * atb.frobenius_norm());
  }
}

TEST_CASE("square nonsingular systems round-trip") {
  std::mt19937_64 rng(3);
  for (std::size_t n = 1; n <= 12; ++n) {
    DenseMatrix a = random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 3.0;
    const DenseMatrix x0 = random_matrix(n, 2, rng);
    const DenseMatrix x = solve_least_squares(a, matmul(a, x0), 0.0);
    CHECK((x - x0).frobenius_norm() < 1e-8 * x0.frobenius_norm());
  }
}

TEST_CASE("gemm transposition variants agree with explicit transposes") {
  std::mt19937_64 rng(5);
  const DenseMatrix a = random_matrix(4, 3, rng);
  const DenseMatrix b = random_matrix(4, 5, rng);
  DenseMatrix c;
  gemm(a, Transpose::kYes, b, Transpose::kNo, c);
  CHECK((c - matmul(a.transposed(), b)).frobenius_norm() < 1e-14);
  gemm(b, Transpose::kYes, a, Transpose::kNo, c, 2.0);
  CHECK((c - 2.0 * matmul(b.transposed(), a)).frobenius_norm() < 1e-14);
  CHECK_THROWS_AS(matmul(a, b), DimensionMismatch);
  CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>(3)), DimensionMismatch);
}
