// SPDX-License-Identifier: Apache-2.0
//
// Snapshot persistence: `<stem>.json` manifest plus `<stem>.bin`, a row-major
// f64-le blob in (sample, time, node) order.
#pragma once

#include <filesystem>
#include <string>

#include "gplasdi/fom.hpp"
#include "gplasdi/io.hpp"

namespace gplasdi {

io::json to_json(const FomConfig& config);
FomConfig fom_config_from_json(const io::json& j);

void save_snapshots(const std::filesystem::path& dir, const SnapshotTensor& tensor,
                    const std::string& stem = "dataset");
SnapshotTensor load_snapshots(const std::filesystem::path& dir,
                              const std::string& stem = "dataset");

}  // namespace gplasdi
