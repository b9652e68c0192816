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
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evc/stargan.hpp"

namespace evc {

// Container layout (little-endian):
//   bytes 0..3   "EVCM"
//   bytes 4..7   uint32 format version
//   bytes 8..15  uint64 header length H
//   H bytes      UTF-8 JSON: arch, domains, norm, state, tensors [{name, size}]
//   float64[]    tensors in header order
//   uint32       CRC-32 of everything above
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<double> values;
};

struct Checkpoint {
  ModelBundle model;
  // Free-form training state (config, counters, RNG); null for bare models.
  nlohmann::json state;
  // Tensors beyond the three parameter vectors, e.g. optimizer moments.
  std::vector<NamedTensor> extra;

  const std::vector<double>* find_extra(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
// Throws kIntegrity on a bad magic, truncation or CRC failure and
// kConfigMismatch when the parameter counts disagree with the stored arch.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const ModelBundle& model);
// Throws kConfigMismatch if `expected` is given and differs from the stored arch.
ModelBundle load_model(const std::filesystem::path& path, const ArchConfig* expected = nullptr);

void to_json(nlohmann::json& j, const FeatureNorm& norm);
void from_json(const nlohmann::json& j, FeatureNorm& norm);

}  // namespace evc
