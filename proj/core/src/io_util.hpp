// Copyright 2026 The evc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace evc::detail {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Writes to `<path>.tmp` and renames over `path`, so readers never observe a
// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::vector<nlohmann::json> parse_jsonl(std::string_view text, const std::string& source);
std::string dump_jsonl(const std::vector<nlohmann::json>& rows);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

void append_le_f64(std::vector<std::uint8_t>& out, std::span<const double> values);
void append_le_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void append_le_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
std::uint32_t load_le_u32(const std::uint8_t* p);
std::uint64_t load_le_u64(const std::uint8_t* p);
void load_le_f64(const std::uint8_t* p, std::span<double> out);

}  // namespace evc::detail
