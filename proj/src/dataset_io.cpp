// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/dataset_io.hpp"

#include "gplasdi/errors.hpp"

namespace gplasdi {

io::json to_json(const FomConfig& c) {
  return {{"nx", c.nx},
          {"ny", c.ny},
          {"lx", c.lx},
          {"ly", c.ly},
          {"diffusivity", c.diffusivity},
          {"heat_capacity", c.heat_capacity},
          {"thickness", c.thickness},
          {"source_radius", c.source_radius},
          {"absorption", c.absorption},
          {"x_start", c.x_start},
          {"t_end", c.t_end},
          {"n_steps_internal", c.n_steps_internal},
          {"n_frames", c.n_frames},
          {"ambient_temperature", c.ambient_temperature}};
}

FomConfig fom_config_from_json(const io::json& j) {
  FomConfig c;
  c.nx = io::require(j, "nx").get<std::size_t>();
  c.ny = io::require(j, "ny").get<std::size_t>();
  c.lx = io::require(j, "lx").get<double>();
  c.ly = io::require(j, "ly").get<double>();
  c.diffusivity = io::require(j, "diffusivity").get<double>();
  c.heat_capacity = io::require(j, "heat_capacity").get<double>();
  c.thickness = io::require(j, "thickness").get<double>();
  c.source_radius = io::require(j, "source_radius").get<double>();
  c.absorption = io::require(j, "absorption").get<double>();
  c.x_start = io::require(j, "x_start").get<double>();
  c.t_end = io::require(j, "t_end").get<double>();
  c.n_steps_internal = io::require(j, "n_steps_internal").get<std::size_t>();
  c.n_frames = io::require(j, "n_frames").get<std::size_t>();
  c.ambient_temperature = io::require(j, "ambient_temperature").get<double>();
  return c;
}

void save_snapshots(const std::filesystem::path& dir, const SnapshotTensor& tensor,
                    const std::string& stem) {
  const std::size_t nt = tensor.n_time();
  const std::size_t nu = tensor.n_nodes();
  std::vector<double> blob;
  blob.reserve(tensor.n_samples() * nt * nu);
  io::json params = io::json::array();
  for (std::size_t i = 0; i < tensor.n_samples(); ++i) {
    const DenseMatrix& m = tensor.values[i];
    if (m.rows() != nt || m.cols() != nu) {
      throw DimensionMismatch("save_snapshots: sample " + std::to_string(i) + " has wrong shape");
    }
    blob.insert(blob.end(), m.values().begin(), m.values().end());
    params.push_back({tensor.parameters[i].power, tensor.parameters[i].speed});
  }
  io::json manifest = {{"format", "gplasdi-snapshots"},
                       {"version", 1},
                       {"element_type", "f64-le"},
                       {"byte_order", "little"},
                       {"layout", "row-major (sample, time, node)"},
                       {"shape", {tensor.n_samples(), nt, nu}},
                       {"parameters", params},
                       {"parameter_names", {"power_W", "speed_m_per_s"}},
                       {"times", tensor.times},
                       {"fom_config", to_json(tensor.config)},
                       {"blob", stem + ".bin"}};
  io::write_f64_blob(dir / (stem + ".bin"), blob);
  io::write_json_atomic(dir / (stem + ".json"), manifest);
}

SnapshotTensor load_snapshots(const std::filesystem::path& dir, const std::string& stem) {
  const io::json manifest = io::read_json(dir / (stem + ".json"));
  if (io::require(manifest, "element_type").get<std::string>() != "f64-le") {
    throw FormatError("load_snapshots: unsupported element type");
  }
  const auto shape = io::require(manifest, "shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3) throw FormatError("load_snapshots: shape must have three entries");
  SnapshotTensor t;
  t.config = fom_config_from_json(io::require(manifest, "fom_config"));
  t.times = io::require(manifest, "times").get<std::vector<double>>();
  for (const auto& p : io::require(manifest, "parameters")) {
    t.parameters.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  if (t.parameters.size() != shape[0] || t.times.size() != shape[1]) {
    throw FormatError("load_snapshots: manifest shape disagrees with parameters/times");
  }
  const auto blob =
      io::read_f64_blob(dir / io::require(manifest, "blob").get<std::string>());
  const std::size_t per = shape[1] * shape[2];
  if (blob.size() != shape[0] * per) throw FormatError("load_snapshots: blob length mismatch");
  for (std::size_t i = 0; i < shape[0]; ++i) {
    t.values.emplace_back(shape[1], shape[2],
                          std::vector<double>(blob.begin() + static_cast<std::ptrdiff_t>(i * per),
                                              blob.begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
  }
  return t;
}

}  // namespace gplasdi
