// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/rom.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "gplasdi/errors.hpp"
#include "gplasdi/io.hpp"

namespace gplasdi {

namespace {

bool exploded(std::span<const double> z) {
  for (double v : z)
    if (!std::isfinite(v) || std::abs(v) > kBlowUpThreshold) return true;
  return false;
}

void rk4_step(std::span<double> z, const CoefficientMatrix& xi, double h,
              std::vector<double>& scratch) {
  const std::size_t n = z.size();
  scratch.resize(n);
  const auto k1 = latent_velocity(z, xi);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = z[i] + 0.5 * h * k1[i];
  const auto k2 = latent_velocity(scratch, xi);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = z[i] + 0.5 * h * k2[i];
  const auto k3 = latent_velocity(scratch, xi);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = z[i] + h * k3[i];
  const auto k4 = latent_velocity(scratch, xi);
  for (std::size_t i = 0; i < n; ++i) z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

LatentRollout integrate_latent(std::span<const double> z0, const CoefficientMatrix& xi,
                               std::span<const double> times) {
  if (z0.size() != xi.latent_dim()) throw DimensionMismatch("integrate_latent: z0 size");
  if (times.empty()) throw InvalidArgument("integrate_latent: empty time grid");
  const double h = times.size() > 1 ? times[1] - times[0] : 0.0;
  for (std::size_t n = 1; n < times.size(); ++n) {
    const double d = times[n] - times[n - 1];
    if (!(d > 0.0) || std::abs(d - h) > 1e-9 * std::abs(h)) {
      throw InvalidArgument("integrate_latent: times must be evenly spaced and increasing");
    }
  }
  const std::size_t nz = z0.size();
  DenseMatrix traj(times.size(), nz);
  std::vector<double> z(z0.begin(), z0.end());
  std::vector<double> scratch;
  std::copy(z.begin(), z.end(), traj.row(0).begin());
  for (std::size_t n = 1; n < times.size(); ++n) {
    rk4_step(z, xi, h, scratch);
    if (exploded(z)) {
      DenseMatrix partial(n, nz, std::vector<double>(traj.data(), traj.data() + n * nz));
      return {std::move(partial), true};
    }
    std::copy(z.begin(), z.end(), traj.row(n).begin());
  }
  return {std::move(traj), false};
}

void sample_moments(std::span<const DenseMatrix> samples, DenseMatrix& mean, DenseMatrix& variance) {
  if (samples.empty()) throw InvalidArgument("sample_moments: no samples");
  // Shifted by the first sample so identical samples give exactly zero variance.
  const DenseMatrix& ref = samples.front();
  const double count = static_cast<double>(samples.size());
  mean = DenseMatrix(ref.rows(), ref.cols());
  variance = DenseMatrix(ref.rows(), ref.cols());
  for (const DenseMatrix& d : samples) {
    if (d.rows() != ref.rows() || d.cols() != ref.cols()) {
      throw DimensionMismatch("sample_moments: samples differ in shape");
    }
    const auto a = d.values();
    const auto r = ref.values();
    auto s1 = mean.values();
    auto s2 = variance.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double dev = a[k] - r[k];
      s1[k] += dev;
      s2[k] += dev * dev;
    }
  }
  auto m = mean.values();
  auto v = variance.values();
  const auto r = ref.values();
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double shift = m[k] / count;
    v[k] = std::max(0.0, v[k] / count - shift * shift);
    m[k] = r[k] + shift;
  }
}

void reduce_rollouts(const MLPParameters& mlp, const NormalizationSpec& normalization,
                     RomPrediction& p) {
  p.n_valid = 0;
  p.mean_trajectory = DenseMatrix();
  p.variance_trajectory = DenseMatrix();
  std::vector<DenseMatrix> decoded;
  for (std::size_t s = 0; s < p.latent_samples.size(); ++s) {
    if (p.blow_up[s]) continue;
    DenseMatrix u = decode(mlp, p.latent_samples[s]);
    for (double& v : u.values()) v = normalization.invert(v);
    decoded.push_back(std::move(u));
  }
  p.n_valid = decoded.size();
  if (decoded.empty()) return;
  if (decoded.size() == 1) {
    p.variance_trajectory = DenseMatrix(decoded.front().rows(), decoded.front().cols());
    p.mean_trajectory = std::move(decoded.front());
    return;
  }
  DenseMatrix mean, var;
  sample_moments(decoded, mean, var);
  p.mean_trajectory = std::move(mean);
  p.variance_trajectory = std::move(var);
}

RomPrediction predict(const RomModel& model, const ParameterVector& mu_star,
                      std::span<const double> u0, std::span<const double> latent_times,
                      std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw InvalidArgument("predict: n_samples must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  RomPrediction p;
  p.mu = mu_star;

  std::vector<double> u0n(u0.begin(), u0.end());
  for (double& v : u0n) v = model.normalization.apply(v);
  const std::vector<double> z0 = encode(model.mlp, u0n);

  const XiPosterior posterior = predict(model.gp, mu_star);
  p.xi_mean = posterior.mean;
  std::vector<CoefficientMatrix> xis{posterior.mean};
  if (n_samples > 1) {
    auto draws = sample_xi(posterior, n_samples - 1, seed);
    xis.insert(xis.end(), std::make_move_iterator(draws.begin()),
               std::make_move_iterator(draws.end()));
  }
  for (const CoefficientMatrix& xi : xis) {
    LatentRollout r = integrate_latent(z0, xi, latent_times);
    p.latent_samples.push_back(std::move(r.trajectory));
    p.blow_up.push_back(r.blow_up);
  }
  reduce_rollouts(model.mlp, model.normalization, p);
  p.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return p;
}

double max_relative_error(const DenseMatrix& prediction, const DenseMatrix& truth) {
  double worst = 0.0;
  for (double e : relative_error_per_row(prediction, truth)) worst = std::max(worst, e);
  return worst;
}

std::vector<double> relative_error_per_row(const DenseMatrix& reconstruction,
                                           const DenseMatrix& truth) {
  if (reconstruction.rows() != truth.rows() || reconstruction.cols() != truth.cols()) {
    throw DimensionMismatch("relative error: prediction and truth shapes differ");
  }
  std::vector<double> out(truth.rows());
  for (std::size_t n = 0; n < truth.rows(); ++n) {
    const auto a = reconstruction.row(n);
    const auto b = truth.row(n);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) {
      num += (a[k] - b[k]) * (a[k] - b[k]);
      den += b[k] * b[k];
    }
    if (!(den > 0.0)) throw InvalidArgument("relative error: truth row has zero norm");
    out[n] = std::sqrt(num) / std::sqrt(den);
  }
  return out;
}

void export_diagnostics(const std::filesystem::path& dir, const DiagnosticInputs& in) {
  using io::format_double;
  {
    std::ostringstream os;
    os << "time_index,relative_projection_error\n";
    const auto err = relative_error_per_row(in.reconstruction, in.truth);
    for (std::size_t n = 0; n < err.size(); ++n) os << n << ',' << format_double(err[n]) << '\n';
    io::write_text_atomic(dir / "projection_error.csv", os.str());
  }
  const std::size_t nz = in.true_latent.cols();
  {
    std::ostringstream os;
    os << "source,sample,time_index";
    for (std::size_t j = 0; j < nz; ++j) os << ",z" << j;
    os << '\n';
    auto emit = [&](const char* source, std::size_t sample, const DenseMatrix& z) {
      for (std::size_t n = 0; n < z.rows(); ++n) {
        os << source << ',' << sample << ',' << n;
        for (std::size_t j = 0; j < nz; ++j) os << ',' << format_double(z(n, j));
        os << '\n';
      }
    };
    emit("true", 0, in.true_latent);
    for (std::size_t s = 0; s < in.prediction.latent_samples.size(); ++s) {
      emit("rom", s, in.prediction.latent_samples[s]);
    }
    io::write_text_atomic(dir / "latent_trajectories.csv", os.str());
  }
  if (nz >= 2) {
    std::ostringstream os;
    os << "time_index,offset,z0,z1,f0,f1\n";
    std::vector<double> z(nz);
    for (std::size_t n = 0; n < in.true_latent.rows(); ++n) {
      for (double offset : {0.0, -in.probe_offset, in.probe_offset}) {
        for (std::size_t j = 0; j < nz; ++j) z[j] = in.true_latent(n, j) + offset;
        const auto f = latent_velocity(z, in.prediction.xi_mean);
        os << n << ',' << format_double(offset) << ',' << format_double(z[0]) << ','
           << format_double(z[1]) << ',' << format_double(f[0]) << ',' << format_double(f[1])
           << '\n';
      }
    }
    io::write_text_atomic(dir / "phase_portrait.csv", os.str());
  }
}

void export_diagnostics(const std::filesystem::path& dir, const RomPrediction& prediction,
                        const DenseMatrix& truth, const MLPParameters& mlp,
                        const NormalizationSpec& normalization, double probe_offset) {
  const DenseMatrix true_latent = encode(mlp, normalization.apply(truth));
  const DenseMatrix reconstruction = normalization.invert(decode(mlp, true_latent));
  export_diagnostics(dir, {prediction, truth, reconstruction, true_latent, probe_offset});
}

}  // namespace gplasdi
