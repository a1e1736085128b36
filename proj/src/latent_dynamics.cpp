// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/latent_dynamics.hpp"

#include <sstream>

#include "gplasdi/errors.hpp"
#include "gplasdi/io.hpp"

namespace gplasdi {

CoefficientMatrix::CoefficientMatrix(DenseMatrix m) : xi(std::move(m)) {
  if (xi.cols() != xi.rows() + 1) {
    throw DimensionMismatch("CoefficientMatrix: expected Nz x (Nz+1), got " +
                            std::to_string(xi.rows()) + "x" + std::to_string(xi.cols()));
  }
  if (!xi.all_finite()) throw InvalidArgument("CoefficientMatrix: non-finite entry");
}

CoefficientMatrix CoefficientMatrix::zeros(std::size_t nz) {
  return CoefficientMatrix(DenseMatrix(nz, nz + 1));
}

std::vector<std::string> LibrarySpec::term_names() const {
  std::vector<std::string> names{"1"};
  for (std::size_t j = 0; j < latent_dim; ++j) names.push_back("z" + std::to_string(j));
  return names;
}

void LatentTrajectorySet::compute_velocities(double dt) {
  velocities.clear();
  for (const DenseMatrix& z : values) velocities.push_back(finite_difference_velocity(z, dt));
}

DenseMatrix finite_difference_velocity(const DenseMatrix& z, double dt) {
  if (z.rows() < 2) throw DegenerateTrajectory("finite_difference_velocity: need Nt >= 1");
  if (!(dt > 0.0)) throw InvalidArgument("finite_difference_velocity: dt must be > 0");
  const std::size_t n = z.rows();
  DenseMatrix v(n, z.cols());
  for (std::size_t r = 0; r + 1 < n; ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) v(r, c) = (z(r + 1, c) - z(r, c)) / dt;
  for (std::size_t c = 0; c < z.cols(); ++c) v(n - 1, c) = (z(n - 1, c) - z(n - 2, c)) / dt;
  return v;
}

DenseMatrix finite_difference_adjoint(const DenseMatrix& g, double dt) {
  const std::size_t n = g.rows();
  if (n < 2) throw DegenerateTrajectory("finite_difference_adjoint: need Nt >= 1");
  DenseMatrix out(n, g.cols());
  for (std::size_t c = 0; c < g.cols(); ++c) {
    for (std::size_t r = 0; r + 1 < n; ++r) {
      out(r + 1, c) += g(r, c) / dt;
      out(r, c) -= g(r, c) / dt;
    }
    out(n - 1, c) += g(n - 1, c) / dt;
    out(n - 2, c) -= g(n - 1, c) / dt;
  }
  return out;
}

DenseMatrix build_library(const DenseMatrix& z) {
  DenseMatrix phi(z.rows(), z.cols() + 1);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    phi(r, 0) = 1.0;
    for (std::size_t c = 0; c < z.cols(); ++c) phi(r, c + 1) = z(r, c);
  }
  return phi;
}

CoefficientMatrix fit_coefficients(const DenseMatrix& z, double dt, double ridge) {
  const DenseMatrix z_dot = finite_difference_velocity(z, dt);
  const DenseMatrix phi = build_library(z);
  if (ridge == 0.0 && phi.rows() < phi.cols()) {
    throw SingularSystem("fit_coefficients: " + std::to_string(phi.rows()) +
                         " rows cannot determine " + std::to_string(phi.cols()) + " terms");
  }
  return CoefficientMatrix(solve_least_squares(phi, z_dot, ridge).transposed());
}

DenseMatrix sindy_residual(const DenseMatrix& z, const DenseMatrix& z_dot,
                           const CoefficientMatrix& xi) {
  if (z.cols() != xi.latent_dim() || z_dot.rows() != z.rows() || z_dot.cols() != z.cols()) {
    throw DimensionMismatch("sindy_residual: trajectory and coefficient shapes differ");
  }
  DenseMatrix r = z_dot;
  gemm(build_library(z), Transpose::kNo, xi.xi, Transpose::kYes, r, -1.0, 1.0);
  return r;
}

double sindy_loss(const LatentTrajectorySet& z_all, std::span<const CoefficientMatrix> xi_all,
                  double dt) {
  if (z_all.values.size() != xi_all.size() || xi_all.empty()) {
    throw DimensionMismatch("sindy_loss: " + std::to_string(z_all.values.size()) +
                            " trajectories but " + std::to_string(xi_all.size()) + " coefficient sets");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < xi_all.size(); ++i) {
    const DenseMatrix& z = z_all.values[i];
    const DenseMatrix z_dot = z_all.velocities.size() == z_all.values.size()
                                  ? z_all.velocities[i]
                                  : finite_difference_velocity(z, dt);
    total += sindy_residual(z, z_dot, xi_all[i]).squared_norm();
  }
  return total / static_cast<double>(xi_all.size());
}

std::vector<double> latent_velocity(std::span<const double> z, const CoefficientMatrix& xi) {
  if (z.size() != xi.latent_dim()) throw DimensionMismatch("latent_velocity: wrong latent size");
  std::vector<double> f(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    double s = xi.xi(k, 0);
    for (std::size_t j = 0; j < z.size(); ++j) s += xi.xi(k, j + 1) * z[j];
    f[k] = s;
  }
  return f;
}

void write_coefficients(const std::filesystem::path& path,
                        std::span<const ParameterVector> parameters,
                        std::span<const CoefficientMatrix> xi_all) {
  if (parameters.size() != xi_all.size()) {
    throw DimensionMismatch("write_coefficients: parameter and coefficient counts differ");
  }
  std::ostringstream os;
  const std::size_t nz = xi_all.empty() ? 0 : xi_all.front().latent_dim();
  os << "# gplasdi latent coefficients\n";
  os << "# rows: latent velocity components; columns: library terms";
  for (const auto& name : LibrarySpec{nz}.term_names()) os << ' ' << name;
  os << "\nlatent_dim " << nz << "\nsamples " << xi_all.size() << "\n";
  for (std::size_t i = 0; i < xi_all.size(); ++i) {
    os << "sample " << i << " power " << io::format_double(parameters[i].power) << " speed "
       << io::format_double(parameters[i].speed) << "\n";
    const DenseMatrix& m = xi_all[i].xi;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? " " : "") << io::format_double(m(r, c));
      os << "\n";
    }
  }
  io::write_text_atomic(path, os.str());
}

std::vector<std::pair<ParameterVector, CoefficientMatrix>> read_coefficients(
    const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::string word;
  std::size_t nz = 0;
  std::size_t count = 0;
  while (in.peek() == '#') std::getline(in, line);
  if (!(in >> word >> nz) || word != "latent_dim") throw FormatError("read_coefficients: latent_dim");
  if (!(in >> word >> count) || word != "samples") throw FormatError("read_coefficients: samples");
  std::vector<std::pair<ParameterVector, CoefficientMatrix>> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t index = 0;
    std::string kp, ks;
    ParameterVector mu;
    if (!(in >> word >> index >> kp >> mu.power >> ks >> mu.speed) || word != "sample") {
      throw FormatError("read_coefficients: malformed sample header");
    }
    DenseMatrix m(nz, nz + 1);
    for (double& v : m.values())
      if (!(in >> v)) throw FormatError("read_coefficients: truncated matrix");
    out.emplace_back(mu, CoefficientMatrix(std::move(m)));
  }
  return out;
}

}  // namespace gplasdi
