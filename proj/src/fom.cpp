// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/fom.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "gplasdi/errors.hpp"

namespace gplasdi {

void FomConfig::validate() const {
  if (nx < 2 || ny < 2) throw InvalidArgument("FomConfig: nx and ny must be >= 2");
  if (!(lx > 0 && ly > 0 && diffusivity > 0 && heat_capacity > 0 && thickness > 0 &&
        source_radius > 0 && t_end > 0)) {
    throw InvalidArgument("FomConfig: lengths, diffusivity, heat capacity, radius and t_end must be > 0");
  }
  if (!(absorption >= 0.0 && absorption <= 1.0)) {
    throw InvalidArgument("FomConfig: absorption efficiency must lie in [0, 1]");
  }
  if (!(ambient_temperature > 0)) throw InvalidArgument("FomConfig: ambient temperature must be > 0");
  if (n_frames < 2) throw InvalidArgument("FomConfig: need at least two output frames");
  if (n_steps_internal == 0 || n_steps_internal % (n_frames - 1) != 0) {
    throw InvalidArgument("FomConfig: n_steps_internal must be a positive multiple of n_frames - 1");
  }
  const double h = std::min(dx(), dy());
  const double limit = 0.25 * h * h / diffusivity;
  if (dt() > limit) {
    std::ostringstream os;
    os << "FomConfig: CFL stability bound violated, dt=" << dt() << " s exceeds 0.25*h^2/alpha="
       << limit << " s";
    throw CflViolation(os.str());
  }
}

HeatSolver::HeatSolver(FomConfig config) : config_(std::move(config)) {
  config_.validate();
  const double r0 = config_.source_radius;
  const double yc = 0.5 * config_.ly;
  source_y_.resize(config_.ny);
  double sum = 0.0;
  for (std::size_t j = 0; j < config_.ny; ++j) {
    const double y = (static_cast<double>(j) + 0.5) * config_.dy() - yc;
    source_y_[j] = std::exp(-y * y / (2.0 * r0 * r0));
    sum += source_y_[j];
  }
  for (double& v : source_y_) v /= sum;
  source_x_.resize(config_.nx);
  scratch_.resize(config_.n_nodes());
}

void HeatSolver::step(std::span<double> field, double t, double source_power, double speed) {
  const std::size_t nx = config_.nx;
  const std::size_t ny = config_.ny;
  if (field.size() != nx * ny) throw DimensionMismatch("HeatSolver::step: wrong field size");
  const double dt = config_.dt();
  const double cx = config_.diffusivity * dt / (config_.dx() * config_.dx());
  const double cy = config_.diffusivity * dt / (config_.dy() * config_.dy());

  // Zero-flux walls: missing neighbours contribute no flux, so the stencil
  // rows sum to zero and the total energy is conserved.
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t k = j * nx + i;
      const double u = field[k];
      double lap = 0.0;
      if (i > 0) lap += cx * (field[k - 1] - u);
      if (i + 1 < nx) lap += cx * (field[k + 1] - u);
      if (j > 0) lap += cy * (field[k - nx] - u);
      if (j + 1 < ny) lap += cy * (field[k + nx] - u);
      scratch_[k] = u + lap;
    }
  }

  if (source_power != 0.0) {
    // The discrete Gaussian is renormalized so exactly source_power·dt joules
    // enter the slab each step.
    const double r0 = config_.source_radius;
    const double xs = config_.x_start + speed * t;
    double sum = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = (static_cast<double>(i) + 0.5) * config_.dx() - xs;
      source_x_[i] = std::exp(-x * x / (2.0 * r0 * r0));
      sum += source_x_[i];
    }
    const double cell_volume = config_.dx() * config_.dy() * config_.thickness;
    const double scale = source_power * dt / (sum * cell_volume * config_.heat_capacity);
    for (std::size_t j = 0; j < ny; ++j) {
      const double sy = scale * source_y_[j];
      for (std::size_t i = 0; i < nx; ++i) scratch_[j * nx + i] += sy * source_x_[i];
    }
  }
  std::copy(scratch_.begin(), scratch_.end(), field.begin());
}

double HeatSolver::stored_energy(std::span<const double> field) const {
  double s = 0.0;
  for (double u : field) s += u - config_.ambient_temperature;
  return config_.heat_capacity * config_.thickness * config_.dx() * config_.dy() * s;
}

Trajectory simulate(const FomConfig& config, const ParameterVector& mu) {
  config.validate();
  if (!(mu.power >= 0.0) || !(mu.speed > 0.0)) {
    throw InvalidArgument("simulate: power must be >= 0 and speed > 0");
  }
  if (config.x_start + mu.speed * config.t_end > config.lx) {
    std::ostringstream os;
    os << "simulate: source leaves the domain (x(t_end)=" << config.x_start + mu.speed * config.t_end
       << " m > lx=" << config.lx << " m)";
    throw SourceExitsDomain(os.str());
  }

  HeatSolver solver(config);
  const std::size_t nu = config.n_nodes();
  const std::size_t stride = config.n_steps_internal / (config.n_frames - 1);
  const double dt = config.dt();
  const double absorbed = config.absorption * mu.power;

  Trajectory out{DenseMatrix(config.n_frames, nu), std::vector<double>(config.n_frames)};
  std::vector<double> field(nu, config.ambient_temperature);
  std::copy(field.begin(), field.end(), out.values.row(0).begin());
  for (std::size_t f = 0; f < config.n_frames; ++f) {
    out.times[f] = config.t_end * static_cast<double>(f) / static_cast<double>(config.n_frames - 1);
  }
  for (std::size_t n = 0; n < config.n_steps_internal; ++n) {
    solver.step(field, static_cast<double>(n) * dt, absorbed, mu.speed);
    if ((n + 1) % stride == 0) {
      std::copy(field.begin(), field.end(), out.values.row((n + 1) / stride).begin());
    }
  }
  if (!out.values.all_finite()) throw Error("simulate: non-finite temperatures");
  return out;
}

SnapshotTensor generate_dataset(const FomConfig& config, std::span<const ParameterVector> grid,
                                std::size_t threads, std::vector<double>* wall_times) {
  if (grid.empty()) throw InvalidArgument("generate_dataset: empty parameter grid");
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (grid[i] == grid[j]) {
        throw InvalidArgument("generate_dataset: duplicate parameter entries at " +
                              std::to_string(j) + " and " + std::to_string(i));
      }
  config.validate();

  SnapshotTensor out{config, {grid.begin(), grid.end()}, {}, std::vector<DenseMatrix>(grid.size())};
  std::vector<std::vector<double>> times(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::vector<double> seconds(grid.size());

  auto work = [&](std::size_t i) {
    try {
      const auto start = std::chrono::steady_clock::now();
      Trajectory t = simulate(config, grid[i]);
      seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      out.values[i] = std::move(t.values);
      times[i] = std::move(t.times);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, grid.size());
  if (threads == 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) work(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < grid.size(); i += threads) work(i);
      });
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!errors[i]) continue;
    std::ostringstream os;
    os << "generate_dataset: sample " << i << " (P=" << grid[i].power << " W, S=" << grid[i].speed
       << " m/s): ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const SourceExitsDomain& e) {
      throw SourceExitsDomain(os.str() + e.what());
    } catch (const CflViolation& e) {
      throw CflViolation(os.str() + e.what());
    } catch (const std::exception& e) {
      throw Error(os.str() + e.what());
    }
  }
  out.times = std::move(times.front());
  if (wall_times) *wall_times = std::move(seconds);
  return out;
}

std::vector<ParameterVector> make_grid(std::span<const double> powers,
                                       std::span<const double> speeds) {
  std::vector<ParameterVector> grid;
  grid.reserve(powers.size() * speeds.size());
  for (double p : powers)
    for (double s : speeds) grid.push_back({p, s});
  return grid;
}

std::vector<ParameterVector> default_grid() {
  const double powers[] = {120, 130, 140, 150, 160};
  const double speeds[] = {0.08, 0.09, 0.10, 0.11, 0.12};
  return make_grid(powers, speeds);
}

}  // namespace gplasdi
