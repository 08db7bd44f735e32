// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cei::harness {

/// Writes to a sibling temporary file, then renames it over the target, so a
/// failed run never leaves a partial file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Pretty-printed with two-space indent and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<nlohmann::json>& rows);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace cei::harness
