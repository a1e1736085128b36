// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gplasdi/errors.hpp"
#include "gplasdi/io.hpp"
#include "gplasdi/rng.hpp"

namespace gplasdi {

double rbf_kernel(std::span<const double, 2> a, std::span<const double, 2> b,
                  const GpHyperparameters& h) {
  double r2 = 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    const double t = (a[d] - b[d]) / h.length_scales[d];
    r2 += t * t;
  }
  return h.signal_variance * std::exp(-0.5 * r2);
}

namespace {

std::span<const double, 2> row2(const DenseMatrix& m, std::size_t r) {
  return std::span<const double, 2>(m.data() + 2 * r, 2);
}

DenseMatrix kernel_matrix(const DenseMatrix& x, const GpHyperparameters& h) {
  const std::size_t n = x.rows();
  DenseMatrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = rbf_kernel(row2(x, i), row2(x, j), h);
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) += h.noise_variance;
  }
  return k;
}

// In-place Cholesky without exceptions; false on a non-positive pivot.
bool factor_in_place(DenseMatrix& a) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) return false;
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
    for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
  }
  return true;
}

std::optional<ScalarGp> try_condition(const DenseMatrix& inputs, std::span<const double> y,
                                      const GpHyperparameters& hyper) {
  DenseMatrix l = kernel_matrix(inputs, hyper);
  if (!factor_in_place(l)) return std::nullopt;
  const std::size_t n = y.size();
  const DenseMatrix alpha = cholesky_solve(l, DenseMatrix::column(y));
  double fit = 0.0;
  double logdet = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fit += y[i] * alpha(i, 0);
    logdet += std::log(l(i, i));
  }
  ScalarGp gp;
  gp.hyper = hyper;
  gp.targets.assign(y.begin(), y.end());
  gp.chol = std::move(l);
  gp.alpha.assign(alpha.values().begin(), alpha.values().end());
  gp.log_marginal_likelihood =
      -0.5 * fit - logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return gp;
}

// Search coordinates in log10 space: σf², ℓ_P, ℓ_S, σn².
using LogPoint = std::array<double, 4>;

GpHyperparameters from_log(const LogPoint& p) {
  return {std::pow(10.0, p[0]), {std::pow(10.0, p[1]), std::pow(10.0, p[2])}, std::pow(10.0, p[3])};
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (n <= 1) return {0.5 * (std::log10(lo) + std::log10(hi))};
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = std::log10(lo) + (std::log10(hi) - std::log10(lo)) * static_cast<double>(k) /
                                static_cast<double>(n - 1);
  }
  return g;
}

}  // namespace

ScalarGp condition_gp(const DenseMatrix& inputs, std::span<const double> targets,
                      const GpHyperparameters& hyper) {
  if (inputs.rows() != targets.size() || inputs.cols() != 2) {
    throw DimensionMismatch("condition_gp: inputs must be N x 2 with N targets");
  }
  auto gp = try_condition(inputs, targets, hyper);
  if (!gp) throw NotPositiveDefinite("condition_gp: kernel matrix is not positive definite");
  return *std::move(gp);
}

ScalarGp fit_scalar_gp(const DenseMatrix& inputs, std::span<const double> targets,
                       const GpFitOptions& o) {
  if (inputs.rows() != targets.size() || inputs.cols() != 2) {
    throw DimensionMismatch("fit_scalar_gp: inputs must be N x 2 with N targets");
  }
  const LogPoint lo{std::log10(o.signal_min), std::log10(o.length_min), std::log10(o.length_min),
                    std::log10(o.fixed_noise ? *o.fixed_noise : o.noise_min)};
  const LogPoint hi{std::log10(o.signal_max), std::log10(o.length_max), std::log10(o.length_max),
                    std::log10(o.fixed_noise ? *o.fixed_noise : o.noise_max)};
  const auto signal = log_grid(o.signal_min, o.signal_max, o.grid_points);
  const auto length = log_grid(o.length_min, o.length_max, o.grid_points);
  const auto noise = o.fixed_noise ? std::vector<double>{std::log10(*o.fixed_noise)}
                                   : log_grid(o.noise_min, o.noise_max, o.noise_points);

  auto score = [&](const LogPoint& p) {
    auto gp = try_condition(inputs, targets, from_log(p));
    return gp ? gp->log_marginal_likelihood : -std::numeric_limits<double>::infinity();
  };

  // Coarse grid; keep the best `starts` nodes (ties resolved by visit order).
  std::vector<std::pair<double, LogPoint>> ranked;
  for (double s : signal)
    for (double lp : length)
      for (double ls : length)
        for (double n : noise) {
          const LogPoint p{s, lp, ls, n};
          ranked.emplace_back(score(p), p);
        }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  ranked.resize(std::min(ranked.size(), std::max<std::size_t>(o.starts, 1)));

  // Coordinate search with a halving step from each start.
  const double initial_step =
      o.grid_points > 1 ? (hi[1] - lo[1]) / static_cast<double>(o.grid_points - 1) / 2.0 : 0.5;
  double best_score = -std::numeric_limits<double>::infinity();
  LogPoint best = ranked.front().second;
  for (auto [value, point] : ranked) {
    for (double step = initial_step; step >= o.final_step; step /= 2.0) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (std::size_t d = 0; d < 4; ++d) {
          if (hi[d] == lo[d]) continue;
          for (double dir : {-1.0, 1.0}) {
            LogPoint trial = point;
            trial[d] = std::clamp(point[d] + dir * step, lo[d], hi[d]);
            if (trial[d] == point[d]) continue;
            const double s = score(trial);
            if (s > value) {
              value = s;
              point = trial;
              improved = true;
            }
          }
        }
      }
    }
    if (value > best_score) {
      best_score = value;
      best = point;
    }
  }
  auto gp = try_condition(inputs, targets, from_log(best));
  if (!gp) throw NotPositiveDefinite("fit_scalar_gp: no admissible hyperparameters");
  return *std::move(gp);
}

std::array<double, 2> GPSurrogate::standardize(const ParameterVector& mu) const {
  return {(mu.power - center[0]) / scale[0], (mu.speed - center[1]) / scale[1]};
}

GPSurrogate fit_gp(std::span<const ParameterVector> params, std::span<const CoefficientMatrix> xi_all,
                   const GpFitOptions& options) {
  if (params.size() != xi_all.size()) {
    throw DimensionMismatch("fit_gp: parameter and coefficient counts differ");
  }
  if (params.size() < 2) throw InvalidArgument("fit_gp: need at least two training samples");
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (params[i] == params[j]) {
        throw DegenerateInputs("fit_gp: parameter vectors " + std::to_string(j) + " and " +
                               std::to_string(i) + " coincide");
      }

  GPSurrogate s;
  s.parameters.assign(params.begin(), params.end());
  s.latent_dim = xi_all.front().latent_dim();
  const double n = static_cast<double>(params.size());
  for (std::size_t d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& p : params) mean += d == 0 ? p.power : p.speed;
    mean /= n;
    double var = 0.0;
    for (const auto& p : params) {
      const double v = (d == 0 ? p.power : p.speed) - mean;
      var += v * v;
    }
    const double sd = std::sqrt(var / n);
    s.center[d] = mean;
    s.scale[d] = sd > 0.0 ? sd : 1.0;
  }
  s.inputs = DenseMatrix(params.size(), 2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto x = s.standardize(params[i]);
    s.inputs(i, 0) = x[0];
    s.inputs(i, 1) = x[1];
  }

  const std::size_t n_entries = s.latent_dim * (s.latent_dim + 1);
  std::vector<double> y(params.size());
  for (std::size_t e = 0; e < n_entries; ++e) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (xi_all[i].latent_dim() != s.latent_dim) {
        throw DimensionMismatch("fit_gp: coefficient matrices have different latent sizes");
      }
      y[i] = xi_all[i].xi.values()[e];
    }
    s.gps.push_back(fit_scalar_gp(s.inputs, y, options));
  }
  return s;
}

XiPosterior predict(const GPSurrogate& s, const ParameterVector& mu_star) {
  const auto x = s.standardize(mu_star);
  const std::size_t n = s.n_train();
  XiPosterior out{CoefficientMatrix::zeros(s.latent_dim),
                  DenseMatrix(s.latent_dim, s.latent_dim + 1)};
  DenseMatrix k_star(n, 1);
  for (std::size_t e = 0; e < s.gps.size(); ++e) {
    const ScalarGp& gp = s.gps[e];
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      k_star(i, 0) = rbf_kernel(x, row2(s.inputs, i), gp.hyper);
      mean += k_star(i, 0) * gp.alpha[i];
    }
    const DenseMatrix v = solve_lower(gp.chol, k_star);
    const double var = std::max(0.0, gp.hyper.signal_variance - v.squared_norm());
    out.mean.xi.values()[e] = mean;
    out.std.values()[e] = std::sqrt(var);
  }
  return out;
}

std::vector<CoefficientMatrix> sample_xi(const XiPosterior& posterior, std::size_t n_samples,
                                         std::uint64_t seed) {
  if (n_samples == 0) throw InvalidArgument("sample_xi: n_samples must be >= 1");
  NormalGenerator normal(seed);
  std::vector<CoefficientMatrix> out;
  out.reserve(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    CoefficientMatrix c = posterior.mean;
    auto values = c.xi.values();
    const auto sd = posterior.std.values();
    for (std::size_t e = 0; e < values.size(); ++e) values[e] += sd[e] * normal();
    out.push_back(std::move(c));
  }
  return out;
}

void save_gp(const std::filesystem::path& dir, const GPSurrogate& s, const std::string& stem) {
  io::json coefficients = io::json::array();
  std::vector<double> blob;
  for (std::size_t e = 0; e < s.gps.size(); ++e) {
    const ScalarGp& gp = s.gps[e];
    coefficients.push_back({{"row", e / (s.latent_dim + 1)},
                            {"col", e % (s.latent_dim + 1)},
                            {"signal_variance", gp.hyper.signal_variance},
                            {"length_scale_power", gp.hyper.length_scales[0]},
                            {"length_scale_speed", gp.hyper.length_scales[1]},
                            {"noise_variance", gp.hyper.noise_variance},
                            {"log_marginal_likelihood", gp.log_marginal_likelihood}});
    blob.insert(blob.end(), gp.targets.begin(), gp.targets.end());
    blob.insert(blob.end(), gp.chol.values().begin(), gp.chol.values().end());
    blob.insert(blob.end(), gp.alpha.begin(), gp.alpha.end());
  }
  io::json params = io::json::array();
  for (const auto& p : s.parameters) params.push_back({p.power, p.speed});
  io::json manifest = {{"format", "gplasdi-gp"},
                       {"version", 1},
                       {"kernel", "squared-exponential, per-dimension length scales"},
                       {"latent_dim", s.latent_dim},
                       {"parameters", params},
                       {"standardization", {{"center", s.center}, {"scale", s.scale}}},
                       {"coefficients", coefficients},
                       {"element_type", "f64-le"},
                       {"blob_layout", "per coefficient: targets[N], cholesky[N*N], alpha[N]"},
                       {"blob", stem + ".bin"}};
  io::write_f64_blob(dir / (stem + ".bin"), blob);
  io::write_json_atomic(dir / (stem + ".json"), manifest);
}

GPSurrogate load_gp(const std::filesystem::path& dir, const std::string& stem) {
  const io::json m = io::read_json(dir / (stem + ".json"));
  GPSurrogate s;
  s.latent_dim = io::require(m, "latent_dim").get<std::size_t>();
  for (const auto& p : io::require(m, "parameters")) {
    s.parameters.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  const auto& st = io::require(m, "standardization");
  s.center = io::require(st, "center").get<std::array<double, 2>>();
  s.scale = io::require(st, "scale").get<std::array<double, 2>>();
  const std::size_t n = s.parameters.size();
  s.inputs = DenseMatrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = s.standardize(s.parameters[i]);
    s.inputs(i, 0) = x[0];
    s.inputs(i, 1) = x[1];
  }
  const auto blob = io::read_f64_blob(dir / io::require(m, "blob").get<std::string>());
  std::size_t offset = 0;
  auto take = [&](std::size_t count) {
    if (offset + count > blob.size()) throw FormatError("load_gp: blob too short");
    std::vector<double> out(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                            blob.begin() + static_cast<std::ptrdiff_t>(offset + count));
    offset += count;
    return out;
  };
  for (const auto& c : io::require(m, "coefficients")) {
    ScalarGp gp;
    gp.hyper.signal_variance = io::require(c, "signal_variance").get<double>();
    gp.hyper.length_scales = {io::require(c, "length_scale_power").get<double>(),
                              io::require(c, "length_scale_speed").get<double>()};
    gp.hyper.noise_variance = io::require(c, "noise_variance").get<double>();
    gp.log_marginal_likelihood = io::require(c, "log_marginal_likelihood").get<double>();
    gp.targets = take(n);
    gp.chol = DenseMatrix(n, n, take(n * n));
    gp.alpha = take(n);
    s.gps.push_back(std::move(gp));
  }
  if (s.gps.size() != s.latent_dim * (s.latent_dim + 1) || offset != blob.size()) {
    throw FormatError("load_gp: coefficient count or blob length mismatch");
  }
  return s;
}

}  // namespace gplasdi
