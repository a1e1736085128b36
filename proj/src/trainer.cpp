// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gplasdi/errors.hpp"
#include "gplasdi/rng.hpp"
#include "gplasdi/rom.hpp"

namespace gplasdi {

void TrainConfig::validate(std::size_t grid_size) const {
  if (!(beta1 >= 0 && beta2 >= 0 && beta3 >= 0)) throw InvalidArgument("TrainConfig: betas must be >= 0");
  if (!(lr >= 0)) throw InvalidArgument("TrainConfig: learning rate must be >= 0");
  if (n_epochs < 0) throw InvalidArgument("TrainConfig: n_epochs must be >= 0");
  if (n_greedy <= 0) throw InvalidArgument("TrainConfig: n_greedy must be > 0");
  if (latent_dim == 0) throw InvalidArgument("TrainConfig: latent_dim must be > 0");
  if (n_uq_samples == 0) throw InvalidArgument("TrainConfig: n_uq_samples must be > 0");
  std::set<std::size_t> seen;
  for (std::size_t i : initial_samples) {
    if (i >= grid_size) throw InvalidArgument("TrainConfig: initial sample index out of range");
    if (!seen.insert(i).second) throw InvalidArgument("TrainConfig: duplicate initial sample");
  }
}

std::vector<std::size_t> TrainConfig::layer_sizes(std::size_t n_nodes) const {
  std::vector<std::size_t> sizes{n_nodes};
  sizes.insert(sizes.end(), hidden_widths.begin(), hidden_widths.end());
  sizes.push_back(latent_dim);
  return sizes;
}

TrainingBatch TrainingBatch::from(std::vector<DenseMatrix> samples) {
  TrainingBatch b;
  b.samples = std::move(samples);
  if (b.samples.empty()) return b;
  const std::size_t t = b.samples.front().rows();
  const std::size_t nu = b.samples.front().cols();
  b.stacked = DenseMatrix(t * b.samples.size(), nu);
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    const DenseMatrix& s = b.samples[i];
    if (s.rows() != t || s.cols() != nu) throw DimensionMismatch("TrainingBatch: ragged samples");
    std::copy(s.values().begin(), s.values().end(), b.stacked.values().begin() + static_cast<std::ptrdiff_t>(i * t * nu));
  }
  return b;
}

namespace {

DenseMatrix rows_of(const DenseMatrix& m, std::size_t first, std::size_t count) {
  return {count, m.cols(),
          std::vector<double>(m.data() + first * m.cols(), m.data() + (first + count) * m.cols())};
}

void add_rows(DenseMatrix& m, std::size_t first, const DenseMatrix& block) {
  auto dst = m.values().subspan(first * m.cols(), block.size());
  const auto src = block.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
}

// Coefficient block A = Ξ[:, 1:].
DenseMatrix linear_part(const CoefficientMatrix& xi) {
  const std::size_t nz = xi.latent_dim();
  DenseMatrix a(nz, nz);
  for (std::size_t r = 0; r < nz; ++r)
    for (std::size_t c = 0; c < nz; ++c) a(r, c) = xi.xi(r, c + 1);
  return a;
}

double regularization(std::span<const CoefficientMatrix> xi_all) {
  double s = 0.0;
  for (const auto& xi : xi_all) s += xi.xi.squared_norm();
  return s;
}

}  // namespace

Gradients compute_gradients(const TrainState& state, const TrainingBatch& batch,
                            const TrainConfig& config) {
  const std::size_t n_mu = batch.n_samples();
  const std::size_t t = batch.n_time();
  if (n_mu == 0) throw InvalidArgument("compute_gradients: empty batch");
  if (state.xi_all.size() != n_mu) {
    throw DimensionMismatch("compute_gradients: " + std::to_string(state.xi_all.size()) +
                            " coefficient sets for " + std::to_string(n_mu) + " samples");
  }
  const MLPParameters& mlp = state.mlp;
  const std::size_t n_enc = 2 * mlp.encoder.n_layers();

  Gradients g;
  g.mlp = mlp.zero_gradients();

  ForwardTape enc_tape;
  ForwardTape dec_tape;
  const DenseMatrix z = mlp.encoder.forward(batch.stacked, enc_tape);
  const DenseMatrix rec = mlp.decoder.forward(z, dec_tape);

  // Autoencoder term: mean squared reconstruction error.
  DenseMatrix d_rec = rec;
  d_rec -= batch.stacked;
  g.loss.ae = d_rec.squared_norm() / static_cast<double>(d_rec.size());
  d_rec *= 2.0 * config.beta1 / static_cast<double>(d_rec.size());
  DenseMatrix d_z = mlp.decoder.backward(dec_tape, std::move(d_rec),
                                         std::span(g.mlp).subspan(n_enc), true);

  // SINDy term: per-sample residual R = D·Z − Φ(Z)·Ξᵀ.
  const double w_sindy = 2.0 * config.beta2 / static_cast<double>(n_mu);
  for (std::size_t i = 0; i < n_mu; ++i) {
    const CoefficientMatrix& xi = state.xi_all[i];
    const DenseMatrix zi = rows_of(z, i * t, t);
    const DenseMatrix zi_dot = finite_difference_velocity(zi, state.latent_dt());
    DenseMatrix r = sindy_residual(zi, zi_dot, xi);
    g.loss.sindy += r.squared_norm();

    r *= w_sindy;  // ∂L/∂R
    DenseMatrix dzi = finite_difference_adjoint(r, state.latent_dt());
    gemm(r, Transpose::kNo, linear_part(xi), Transpose::kNo, dzi, -1.0, 1.0);
    add_rows(d_z, i * t, dzi);

    DenseMatrix dxi = xi.xi;
    dxi *= 2.0 * config.beta3;
    gemm(r, Transpose::kYes, build_library(zi), Transpose::kNo, dxi, -1.0, 1.0);
    g.xi.push_back(std::move(dxi));
  }
  g.loss.sindy /= static_cast<double>(n_mu);
  g.loss.reg = regularization(state.xi_all);

  mlp.encoder.backward(enc_tape, std::move(d_z), std::span(g.mlp).subspan(0, n_enc), false);

  g.loss.total = config.beta1 * g.loss.ae + config.beta2 * g.loss.sindy + config.beta3 * g.loss.reg;
  return g;
}

LossBreakdown total_loss(const TrainState& state, const TrainingBatch& batch,
                         const TrainConfig& config) {
  if (state.xi_all.size() != batch.n_samples()) {
    throw DimensionMismatch("total_loss: coefficient and sample counts differ");
  }
  const DenseMatrix z = encode(state.mlp, batch.stacked);
  const DenseMatrix rec = decode(state.mlp, z);
  LossBreakdown l;
  DenseMatrix diff = rec;
  diff -= batch.stacked;
  l.ae = diff.squared_norm() / static_cast<double>(diff.size());
  const std::size_t t = batch.n_time();
  for (std::size_t i = 0; i < batch.n_samples(); ++i) {
    const DenseMatrix zi = rows_of(z, i * t, t);
    l.sindy += sindy_residual(zi, finite_difference_velocity(zi, state.latent_dt()), state.xi_all[i])
                   .squared_norm();
  }
  l.sindy /= static_cast<double>(batch.n_samples());
  l.reg = regularization(state.xi_all);
  l.total = config.beta1 * l.ae + config.beta2 * l.sindy + config.beta3 * l.reg;
  return l;
}

void train_epoch(TrainState& state, const TrainingBatch& batch, const TrainConfig& config) {
  Gradients g = compute_gradients(state, batch, config);
  const LossBreakdown& l = g.loss;
  if (!std::isfinite(l.total) || !std::isfinite(l.ae) || !std::isfinite(l.sindy) ||
      !std::isfinite(l.reg)) {
    throw NonFiniteLoss(state.epoch, l.ae, l.sindy, l.reg, l.total);
  }
  state.loss_history.push_back({state.epoch, l, state.active_set.size()});

  adam_update(state.mlp.tensors(), g.mlp, state.mlp.adam, config.lr);
  std::vector<DenseMatrix*> xi_ptrs;
  for (auto& xi : state.xi_all) xi_ptrs.push_back(&xi.xi);
  adam_update(xi_ptrs, g.xi, state.xi_adam, config.lr);
  ++state.epoch;
}

void refresh_coefficients(TrainState& state, const TrainingBatch& batch, const TrainConfig& config) {
  const std::size_t t = batch.n_time();
  const std::size_t nz = state.mlp.latent_width();
  const DenseMatrix z = encode(state.mlp, batch.stacked);
  // Per sample the loss is (β₂/Nμ)‖R‖² + β₃‖Ξ‖², i.e. ridge = β₃·Nμ/β₂.
  const double ridge = config.beta2 > 0.0
                           ? config.beta3 * static_cast<double>(batch.n_samples()) / config.beta2
                           : 0.0;
  state.xi_all.clear();
  for (std::size_t i = 0; i < batch.n_samples(); ++i) {
    if (config.beta2 > 0.0) {
      state.xi_all.push_back(fit_coefficients(rows_of(z, i * t, t), state.latent_dt(), ridge));
    } else {
      state.xi_all.push_back(CoefficientMatrix::zeros(nz));
    }
  }
  std::vector<const DenseMatrix*> ptrs;
  for (const auto& xi : state.xi_all) ptrs.push_back(&xi.xi);
  state.xi_adam = AdamState::for_tensors(ptrs);
}

std::vector<double> latent_times(std::span<const double> times) {
  if (times.size() < 2) throw DegenerateTrajectory("latent_times: need at least two snapshots");
  const double step = times[1] - times[0];
  if (!(step > 0.0)) throw DegenerateTrajectory("latent_times: times must increase");
  std::vector<double> tau(times.size());
  for (std::size_t n = 0; n < times.size(); ++n) tau[n] = (times[n] - times.front()) / step;
  return tau;
}

GreedyScore greedy_select(const TrainState& state, std::span<const ParameterVector> grid,
                          std::span<const DenseMatrix> initial_fields, const PosteriorFn& posterior,
                          const TrainConfig& config, std::uint64_t seed) {
  if (initial_fields.size() != grid.size()) {
    throw DimensionMismatch("greedy_select: need one initial field per grid point");
  }
  const std::set<std::size_t> active(state.active_set.begin(), state.active_set.end());

  std::optional<GreedyScore> best;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (active.count(c)) continue;
    const DenseMatrix& u0 = initial_fields[c];
    const std::vector<double> z0 = encode(state.mlp, u0.values());
    const XiPosterior post = posterior(grid[c]);
    const auto draws = sample_xi(post, config.n_uq_samples, seed);

    double score = 0.0;
    std::vector<DenseMatrix> decoded;
    for (const CoefficientMatrix& xi : draws) {
      LatentRollout r = integrate_latent(z0, xi, state.tau);
      if (r.blow_up) {
        score = std::numeric_limits<double>::infinity();
        break;
      }
      decoded.push_back(decode(state.mlp, r.trajectory));
    }
    if (std::isfinite(score)) {
      DenseMatrix mean, var;
      sample_moments(decoded, mean, var);
      for (std::size_t n = 0; n < var.rows(); ++n) {
        double reduced = 0.0;
        if (config.reduction == VarianceReduction::kMaxOverTimeOfSpatialMean) {
          for (double v : var.row(n)) reduced += v;
          reduced /= static_cast<double>(var.cols());
        } else {
          for (double v : var.row(n)) reduced = std::max(reduced, v);
        }
        score = std::max(score, reduced);
      }
    }
    if (!best || score > best->score) best = GreedyScore{c, score};
  }
  if (!best) throw NoCandidates("greedy_select: every grid point is already in the training set");
  return *best;
}

std::size_t greedy_select(const TrainState& state, const SnapshotTensor& full_data,
                          const GPSurrogate& gp, const TrainConfig& config, std::uint64_t seed) {
  std::vector<DenseMatrix> initial;
  for (const DenseMatrix& m : full_data.values) {
    DenseMatrix first(1, m.cols(), {m.row(0).begin(), m.row(0).end()});
    initial.push_back(state.normalization.apply(first));
  }
  return greedy_select(state, full_data.parameters, initial,
                       [&](const ParameterVector& mu) { return predict(gp, mu); }, config, seed)
      .index;
}

std::vector<std::size_t> lattice_corners(std::span<const ParameterVector> grid) {
  std::set<double> powers, speeds;
  for (const auto& p : grid) {
    powers.insert(p.power);
    speeds.insert(p.speed);
  }
  if (powers.size() * speeds.size() != grid.size() || powers.size() < 2 || speeds.size() < 2) {
    throw InvalidArgument("lattice_corners: grid is not a full rectangular lattice with >= 2 values per axis");
  }
  std::vector<std::size_t> corners;
  for (double p : {*powers.begin(), *powers.rbegin()})
    for (double s : {*speeds.begin(), *speeds.rbegin()})
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i].power == p && grid[i].speed == s) corners.push_back(i);
  std::sort(corners.begin(), corners.end());
  return corners;
}

GPSurrogate fit_state_gp(const TrainState& state, std::span<const ParameterVector> grid,
                         const TrainConfig& config) {
  std::vector<ParameterVector> params;
  for (std::size_t i : state.active_set) params.push_back(grid[i]);
  return fit_gp(params, state.xi_all, config.gp);
}

namespace {

TrainingBatch batch_for(const SnapshotTensor& data, const TrainState& state) {
  std::vector<DenseMatrix> samples;
  for (std::size_t i : state.active_set) samples.push_back(state.normalization.apply(data.values[i]));
  return TrainingBatch::from(std::move(samples));
}

}  // namespace

TrainState initialize_training(const SnapshotTensor& data, const TrainConfig& config,
                               TrainingBatch& batch) {
  config.validate(data.n_samples());
  TrainState state;
  state.active_set = config.initial_samples.empty() ? lattice_corners(data.parameters)
                                                    : config.initial_samples;
  std::vector<DenseMatrix> raw;
  for (std::size_t i : state.active_set) raw.push_back(data.values[i]);
  state.normalization = fit_normalization(raw);
  state.tau = latent_times(data.times);
  state.mlp = MLPParameters::initialized(config.layer_sizes(data.n_nodes()),
                                         stream_seed(config.seed, "autoencoder/init"));
  batch = batch_for(data, state);
  refresh_coefficients(state, batch, config);
  return state;
}

TrainingResult run_training(const SnapshotTensor& data, const TrainConfig& config,
                            const TrainingObserver& observer) {
  TrainingBatch batch;
  TrainState state = initialize_training(data, config, batch);
  std::size_t greedy_events = 0;
  for (long epoch = 0; epoch < config.n_epochs; ++epoch) {
    if (epoch > 0 && epoch % config.n_greedy == 0 && state.active_set.size() < data.n_samples()) {
      const GPSurrogate gp = fit_state_gp(state, data.parameters, config);
      const std::uint64_t seed =
          stream_seed(config.seed, "greedy/" + std::to_string(greedy_events++));
      const std::size_t added = greedy_select(state, data, gp, config, seed);
      state.active_set.push_back(added);
      batch = batch_for(data, state);
      refresh_coefficients(state, batch, config);
      if (observer.on_greedy) observer.on_greedy(state, gp, added);
    }
    train_epoch(state, batch, config);
    if (observer.on_epoch) observer.on_epoch(state.loss_history.back());
  }
  GPSurrogate gp = fit_state_gp(state, data.parameters, config);
  return {std::move(state), std::move(gp)};
}

}  // namespace gplasdi
