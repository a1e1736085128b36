// SPDX-License-Identifier: Apache-2.0
//
// Affine latent dynamics dz/dt = Ξ·[1; z] identified by regression on
// finite-difference velocities.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gplasdi/fom.hpp"
#include "gplasdi/linalg.hpp"

namespace gplasdi {

/// Ξ, Nz × (Nz+1). Column 0 multiplies the constant term, column 1+j multiplies z_j.
struct CoefficientMatrix {
  DenseMatrix xi;

  CoefficientMatrix() = default;
  explicit CoefficientMatrix(DenseMatrix m);
  static CoefficientMatrix zeros(std::size_t nz);

  std::size_t latent_dim() const noexcept { return xi.rows(); }

  friend bool operator==(const CoefficientMatrix&, const CoefficientMatrix&) = default;
};

/// Library order: [1, z_0, …, z_{Nz−1}].
struct LibrarySpec {
  std::size_t latent_dim = 0;
  std::size_t n_terms() const noexcept { return latent_dim + 1; }
  std::vector<std::string> term_names() const;
};

struct LatentTrajectorySet {
  std::vector<DenseMatrix> values;      ///< one (Nt+1) × Nz trajectory per sample
  std::vector<DenseMatrix> velocities;  ///< filled by compute_velocities()

  void compute_velocities(double dt);
};

/// Forward differences for rows 0..Nt−1, backward difference on the last row.
DenseMatrix finite_difference_velocity(const DenseMatrix& z, double dt);

/// Adjoint of finite_difference_velocity: returns Dᵀ·g for the linear map D.
DenseMatrix finite_difference_adjoint(const DenseMatrix& g, double dt);

DenseMatrix build_library(const DenseMatrix& z);

/// Ridge regression of Ż onto Φ(Z).
CoefficientMatrix fit_coefficients(const DenseMatrix& z, double dt, double ridge);

/// Ż − Φ(Z)·Ξᵀ.
DenseMatrix sindy_residual(const DenseMatrix& z, const DenseMatrix& z_dot,
                           const CoefficientMatrix& xi);

/// (1/Nμ) Σ_i ‖Ż⁽ⁱ⁾ − Φ(Z⁽ⁱ⁾)Ξ⁽ⁱ⁾ᵀ‖²_F.
double sindy_loss(const LatentTrajectorySet& z_all, std::span<const CoefficientMatrix> xi_all,
                  double dt);

/// Ξ·[1; z].
std::vector<double> latent_velocity(std::span<const double> z, const CoefficientMatrix& xi);

/// Plain-text export, one block per training parameter.
void write_coefficients(const std::filesystem::path& path,
                        std::span<const ParameterVector> parameters,
                        std::span<const CoefficientMatrix> xi_all);
std::vector<std::pair<ParameterVector, CoefficientMatrix>> read_coefficients(
    const std::filesystem::path& path);

}  // namespace gplasdi
