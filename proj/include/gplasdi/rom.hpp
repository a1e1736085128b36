// SPDX-License-Identifier: Apache-2.0
//
// Prediction path of the reduced model: encode the initial field, draw Ξ from
// the GP posterior, integrate the latent ODE with fixed-step RK4, decode.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gplasdi/autoencoder.hpp"
#include "gplasdi/gp.hpp"
#include "gplasdi/latent_dynamics.hpp"

namespace gplasdi {

/// Latent magnitude treated as a blow-up.
inline constexpr double kBlowUpThreshold = 1e12;

struct LatentRollout {
  DenseMatrix trajectory;  ///< rows computed before any blow-up, row 0 = z0
  bool blow_up = false;
};

/// Classical RK4 with one step per interval of `times` (which must be evenly
/// spaced and increasing). Stops at the first state with a non-finite or
/// > 1e12 component and flags the rollout.
LatentRollout integrate_latent(std::span<const double> z0, const CoefficientMatrix& xi,
                               std::span<const double> times);

struct RomPrediction {
  ParameterVector mu;
  DenseMatrix mean_trajectory;      ///< (Nt+1) × Nu, K; empty if every rollout blew up
  DenseMatrix variance_trajectory;  ///< K²
  std::vector<DenseMatrix> latent_samples;
  std::vector<bool> blow_up;        ///< per latent sample
  CoefficientMatrix xi_mean;
  std::size_t n_valid = 0;
  double wall_time = 0.0;           ///< seconds

  std::size_t n_blow_up() const noexcept { return blow_up.size() - n_valid; }
};

struct RomModel {
  const MLPParameters& mlp;
  const NormalizationSpec& normalization;
  const GPSurrogate& gp;
};

/// `u0` is the physical (K) initial field; `latent_times` the latent time grid.
/// Rollout 0 uses the posterior mean Ξ; rollouts 1..n_samples−1 use draws
/// seeded by `seed`. Blown-up rollouts are excluded from mean and variance.
RomPrediction predict(const RomModel& model, const ParameterVector& mu_star,
                      std::span<const double> u0, std::span<const double> latent_times,
                      std::size_t n_samples, std::uint64_t seed);

/// Elementwise mean and population variance across equally shaped samples.
void sample_moments(std::span<const DenseMatrix> samples, DenseMatrix& mean, DenseMatrix& variance);

/// Decodes latent rollouts and reduces them to mean/variance in K.
void reduce_rollouts(const MLPParameters& mlp, const NormalizationSpec& normalization,
                     RomPrediction& prediction);

/// maxₙ ‖ũₙ − uₙ‖₂ / ‖uₙ‖₂.
double max_relative_error(const DenseMatrix& prediction, const DenseMatrix& truth);

/// ‖recₙ − uₙ‖₂ / ‖uₙ‖₂ per row.
std::vector<double> relative_error_per_row(const DenseMatrix& reconstruction,
                                           const DenseMatrix& truth);

struct DiagnosticInputs {
  const RomPrediction& prediction;
  const DenseMatrix& truth;           ///< K
  const DenseMatrix& reconstruction;  ///< decode(encode(truth)), K
  const DenseMatrix& true_latent;     ///< encode(truth)
  double probe_offset = 0.05;
};

/// Writes projection_error.csv, latent_trajectories.csv and phase_portrait.csv.
void export_diagnostics(const std::filesystem::path& dir, const DiagnosticInputs& in);

/// Convenience overload that encodes/decodes `truth` with the model.
void export_diagnostics(const std::filesystem::path& dir, const RomPrediction& prediction,
                        const DenseMatrix& truth, const MLPParameters& mlp,
                        const NormalizationSpec& normalization, double probe_offset = 0.05);

}  // namespace gplasdi
