// SPDX-License-Identifier: Apache-2.0
//
// Independent Gaussian-process regressors, one per entry of Ξ, over the
// standardized (power, speed) plane. Squared-exponential kernel with one
// length-scale per parameter dimension.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gplasdi/fom.hpp"
#include "gplasdi/latent_dynamics.hpp"
#include "gplasdi/linalg.hpp"

namespace gplasdi {

struct GpHyperparameters {
  double signal_variance = 1.0;              ///< σf²
  std::array<double, 2> length_scales{1.0, 1.0};  ///< ℓ_P, ℓ_S (standardized units)
  double noise_variance = 1e-8;              ///< σn²
};

/// Log-space search box for the marginal-likelihood fit.
struct GpFitOptions {
  double signal_min = 1e-2, signal_max = 1e2;
  double length_min = 1e-2, length_max = 1e2;
  double noise_min = 1e-8, noise_max = 1e-2;
  /// When set, σn² is held at this value instead of searched.
  std::optional<double> fixed_noise = 1e-8;
  std::size_t grid_points = 9;   ///< per searched dimension (σf², ℓ_P, ℓ_S)
  std::size_t noise_points = 4;
  std::size_t starts = 3;        ///< best grid nodes refined by coordinate search
  double final_step = 1.0 / 64;  ///< decades
};

double rbf_kernel(std::span<const double, 2> a, std::span<const double, 2> b,
                  const GpHyperparameters& h);

struct ScalarGp {
  GpHyperparameters hyper;
  std::vector<double> targets;
  DenseMatrix chol;            ///< L with L Lᵀ = K + σn² I
  std::vector<double> alpha;   ///< (K + σn² I)⁻¹ y
  double log_marginal_likelihood = 0.0;
};

/// Exact GP posterior for fixed hyperparameters; throws NotPositiveDefinite if
/// the kernel matrix cannot be factored.
ScalarGp condition_gp(const DenseMatrix& inputs, std::span<const double> targets,
                      const GpHyperparameters& hyper);

/// Maximizes the log marginal likelihood over the search box of `options`.
ScalarGp fit_scalar_gp(const DenseMatrix& inputs, std::span<const double> targets,
                       const GpFitOptions& options);

struct XiPosterior {
  CoefficientMatrix mean;
  DenseMatrix std;  ///< entrywise predictive standard deviation
};

class GPSurrogate {
 public:
  std::vector<ParameterVector> parameters;
  std::array<double, 2> center{0.0, 0.0};
  std::array<double, 2> scale{1.0, 1.0};
  DenseMatrix inputs;        ///< Nμ × 2, standardized
  std::size_t latent_dim = 0;
  std::vector<ScalarGp> gps;  ///< row-major over the Nz × (Nz+1) entries of Ξ

  std::array<double, 2> standardize(const ParameterVector& mu) const;
  std::size_t n_train() const noexcept { return parameters.size(); }
};

/// Throws DegenerateInputs if two parameter vectors coincide.
GPSurrogate fit_gp(std::span<const ParameterVector> params, std::span<const CoefficientMatrix> xi_all,
                   const GpFitOptions& options = {});

XiPosterior predict(const GPSurrogate& surrogate, const ParameterVector& mu_star);

/// mean + std ⊙ ε with ε ~ N(0, 1) drawn entrywise from NormalGenerator(seed).
std::vector<CoefficientMatrix> sample_xi(const XiPosterior& posterior, std::size_t n_samples,
                                         std::uint64_t seed);

void save_gp(const std::filesystem::path& dir, const GPSurrogate& surrogate,
             const std::string& stem = "gp");
GPSurrogate load_gp(const std::filesystem::path& dir, const std::string& stem = "gp");

}  // namespace gplasdi
