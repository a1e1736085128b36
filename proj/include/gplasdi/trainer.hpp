// SPDX-License-Identifier: Apache-2.0
//
// Joint training of the autoencoder and the per-sample latent coefficients
// under
//
//   L = β₁·L_AE + β₂·L_SINDy + β₃·Σᵢ‖Ξ⁽ⁱ⁾‖²_F,
//
// with the training set enlarged greedily every n_greedy epochs by the grid
// point whose ROM prediction has the largest variance.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gplasdi/autoencoder.hpp"
#include "gplasdi/fom.hpp"
#include "gplasdi/gp.hpp"
#include "gplasdi/latent_dynamics.hpp"

namespace gplasdi {

/// How per-(node, time) prediction variance is reduced to one score per candidate.
enum class VarianceReduction {
  kMaxOverTimeOfSpatialMean,
  kMaxOverAll,
};

struct TrainConfig {
  double beta1 = 1.0;
  double beta2 = 1.0;
  double beta3 = 10.0;
  double lr = 1e-4;
  long n_epochs = 50000;
  long n_greedy = 10000;
  std::vector<std::size_t> initial_samples;  ///< empty: the four lattice corners
  std::uint64_t seed = 0;
  std::size_t n_uq_samples = 20;
  std::vector<std::size_t> hidden_widths{100, 50, 20};
  std::size_t latent_dim = 5;
  GpFitOptions gp;
  VarianceReduction reduction = VarianceReduction::kMaxOverTimeOfSpatialMean;

  /// Throws InvalidArgument on inconsistent settings.
  void validate(std::size_t grid_size) const;
  /// Encoder widths Nu → hidden… → Nz.
  std::vector<std::size_t> layer_sizes(std::size_t n_nodes) const;
};

struct LossBreakdown {
  double total = 0.0;
  double ae = 0.0;
  double sindy = 0.0;
  double reg = 0.0;  ///< Σᵢ‖Ξ⁽ⁱ⁾‖²_F (unweighted)
};

struct LossRecord {
  long epoch = 0;
  LossBreakdown loss;
  std::size_t active = 0;
};

/// Normalized snapshots of the active samples, stacked for full-batch passes.
struct TrainingBatch {
  std::vector<DenseMatrix> samples;  ///< (Nt+1) × Nu each, normalized
  DenseMatrix stacked;               ///< all samples, sample-major rows

  static TrainingBatch from(std::vector<DenseMatrix> samples);
  std::size_t n_samples() const noexcept { return samples.size(); }
  std::size_t n_time() const noexcept { return samples.empty() ? 0 : samples.front().rows(); }
};

struct TrainState {
  MLPParameters mlp;
  std::vector<CoefficientMatrix> xi_all;
  AdamState xi_adam;
  std::vector<std::size_t> active_set;  ///< indices into the full grid
  std::vector<LossRecord> loss_history;
  NormalizationSpec normalization;
  std::vector<double> tau;  ///< latent time of each snapshot, one unit per frame
  long epoch = 0;

  double latent_dt() const { return tau.at(1) - tau.at(0); }
};

struct Gradients {
  LossBreakdown loss;
  std::vector<DenseMatrix> mlp;  ///< aligned with MLPParameters::tensors()
  std::vector<DenseMatrix> xi;   ///< aligned with TrainState::xi_all
};

/// Loss and exact reverse-mode gradients; the SINDy term differentiates
/// through the encoder.
Gradients compute_gradients(const TrainState& state, const TrainingBatch& batch,
                            const TrainConfig& config);

LossBreakdown total_loss(const TrainState& state, const TrainingBatch& batch,
                         const TrainConfig& config);

/// One full-batch Adam step on (θe, θd, Ξ). Throws NonFiniteLoss.
void train_epoch(TrainState& state, const TrainingBatch& batch, const TrainConfig& config);

/// Ridge least-squares refresh of every Ξ⁽ⁱ⁾ from the current encoder, with
/// the ridge matching the β₃/β₂ balance of the loss. Resets Ξ's Adam state.
void refresh_coefficients(TrainState& state, const TrainingBatch& batch, const TrainConfig& config);

/// Latent times in units of the snapshot interval: τₙ = (tₙ − t₀)/(t₁ − t₀).
std::vector<double> latent_times(std::span<const double> times);

using PosteriorFn = std::function<XiPosterior(const ParameterVector&)>;

struct GreedyScore {
  std::size_t index = 0;
  double score = 0.0;  ///< +inf when a rollout blew up
};

/// Scores every grid point outside the active set and returns the argmax
/// (lowest grid index on ties). Throws NoCandidates.
GreedyScore greedy_select(const TrainState& state, std::span<const ParameterVector> grid,
                          std::span<const DenseMatrix> initial_fields, const PosteriorFn& posterior,
                          const TrainConfig& config, std::uint64_t seed);

std::size_t greedy_select(const TrainState& state, const SnapshotTensor& full_data,
                          const GPSurrogate& gp, const TrainConfig& config, std::uint64_t seed);

/// Indices of (min P, min S), (min P, max S), (max P, min S), (max P, max S),
/// ascending. Throws InvalidArgument unless the grid is a full rectangular lattice.
std::vector<std::size_t> lattice_corners(std::span<const ParameterVector> grid);

struct TrainingObserver {
  std::function<void(const LossRecord&)> on_epoch;
  /// Fired after each greedy addition with the GP used for the selection.
  std::function<void(const TrainState&, const GPSurrogate&, std::size_t added)> on_greedy;
};

struct TrainingResult {
  TrainState state;
  GPSurrogate gp;
};

TrainState initialize_training(const SnapshotTensor& full_data, const TrainConfig& config,
                               TrainingBatch& batch);

TrainingResult run_training(const SnapshotTensor& full_data, const TrainConfig& config,
                            const TrainingObserver& observer = {});

/// Active-set parameters and the GP fitted to the current coefficients.
GPSurrogate fit_state_gp(const TrainState& state, std::span<const ParameterVector> grid,
                         const TrainConfig& config);

}  // namespace gplasdi
