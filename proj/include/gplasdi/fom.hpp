// SPDX-License-Identifier: Apache-2.0
//
// Full-order thermal model: explicit finite-volume solver for the 2-D transient
// heat equation with a moving Gaussian surface source,
//
//   ∂u/∂t = α ∇²u + q(x, y, t) / (ρc),
//
// on a cell-centred nx × ny grid with insulated (zero-flux) walls. The source
// deposits an absorbed power ηP into a slab of the given thickness and moves
// along y = ly/2 at constant speed S starting from x_start.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gplasdi/linalg.hpp"

namespace gplasdi {

struct FomConfig {
  std::size_t nx = 32;
  std::size_t ny = 16;
  double lx = 4.0e-3;                ///< m
  double ly = 2.0e-3;                ///< m
  double diffusivity = 3.0e-6;       ///< m²/s
  double heat_capacity = 2.48e6;     ///< ρc, J/(m³·K)
  double thickness = 2.5e-4;         ///< slab depth receiving the source, m
  double source_radius = 2.5e-4;     ///< Gaussian standard deviation r₀, m
  double absorption = 0.4;           ///< η
  double x_start = 2.0e-4;           ///< m
  double t_end = 2.5e-3 / 0.08;      ///< s; slowest grid speed covers 2.5 mm
  std::size_t n_steps_internal = 40000;
  std::size_t n_frames = 101;        ///< Nt + 1 output snapshots
  double ambient_temperature = 300.0;  ///< K

  std::size_t n_nodes() const noexcept { return nx * ny; }
  double dx() const noexcept { return lx / static_cast<double>(nx); }
  double dy() const noexcept { return ly / static_cast<double>(ny); }
  double dt() const noexcept { return t_end / static_cast<double>(n_steps_internal); }

  /// Throws CflViolation or InvalidArgument when the configuration cannot be run.
  void validate() const;

  friend bool operator==(const FomConfig&, const FomConfig&) = default;
};

struct ParameterVector {
  double power = 0.0;  ///< W
  double speed = 0.0;  ///< m/s

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;
};

/// One explicit time step at a time. Exposed separately from simulate() so
/// arbitrary initial fields can be advanced.
class HeatSolver {
 public:
  explicit HeatSolver(FomConfig config);

  const FomConfig& config() const noexcept { return config_; }

  /// Advances `field` (nx*ny, x fastest) from time t by one internal step.
  /// `source_power` is the absorbed power ηP in W; pass 0 for a source-free step.
  void step(std::span<double> field, double t, double source_power, double speed);

  /// ρc·h·Σ(u − T∞)·ΔxΔy, the stored thermal energy above ambient in J.
  double stored_energy(std::span<const double> field) const;

 private:
  FomConfig config_;
  std::vector<double> source_y_;  // normalized Gaussian profile across y
  std::vector<double> source_x_;
  std::vector<double> scratch_;
};

struct Trajectory {
  DenseMatrix values;          ///< (Nt+1) × Nu, K
  std::vector<double> times;   ///< s
};

/// Runs the FOM for one parameter vector. Row 0 is the uniform ambient field.
Trajectory simulate(const FomConfig& config, const ParameterVector& mu);

struct SnapshotTensor {
  FomConfig config;
  std::vector<ParameterVector> parameters;
  std::vector<double> times;
  std::vector<DenseMatrix> values;  ///< one (Nt+1) × Nu matrix per parameter

  std::size_t n_samples() const noexcept { return parameters.size(); }
  std::size_t n_time() const noexcept { return times.size(); }
  std::size_t n_nodes() const noexcept { return values.empty() ? 0 : values.front().cols(); }
};

/// Simulates every grid entry (optionally on `threads` workers) and returns the
/// trajectories in grid order. Per-sample wall times land in `wall_times`.
SnapshotTensor generate_dataset(const FomConfig& config, std::span<const ParameterVector> grid,
                                std::size_t threads = 1, std::vector<double>* wall_times = nullptr);

/// Cartesian product, power-major: (p0,s0), (p0,s1), ...
std::vector<ParameterVector> make_grid(std::span<const double> powers,
                                       std::span<const double> speeds);

/// P ∈ {120..160} W, S ∈ {0.08..0.12} m/s.
std::vector<ParameterVector> default_grid();

}  // namespace gplasdi
