// SPDX-License-Identifier: Apache-2.0
//
// File plumbing shared by every on-disk format: atomic writes, raw f64-le
// blobs and JSON manifests.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gplasdi::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Writes to `path.tmp` and renames over `path`.
void write_text_atomic(const fs::path& path, std::string_view text);
void write_json_atomic(const fs::path& path, const json& j);

/// Raw little-endian IEEE-754 doubles, no header.
void write_f64_blob(const fs::path& path, std::span<const double> values);
std::vector<double> read_f64_blob(const fs::path& path);

std::string read_text(const fs::path& path);
json read_json(const fs::path& path);

/// Shortest decimal that round-trips (17 significant digits).
std::string format_double(double v);

/// Throws FormatError if `j[key]` is missing.
const json& require(const json& j, std::string_view key);

}  // namespace gplasdi::io
