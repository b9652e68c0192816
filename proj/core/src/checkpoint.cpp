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

#include "evc/checkpoint.hpp"

#include <cstring>

#include "evc/error.hpp"
#include "io_util.hpp"

namespace evc {
namespace {

constexpr char kMagic[4] = {'E', 'V', 'C', 'M'};

}  // namespace

const std::vector<double>* Checkpoint::find_extra(const std::string& name) const {
  for (const auto& t : extra) {
    if (t.name == name) return &t.values;
  }
  return nullptr;
}

void to_json(nlohmann::json& j, const FeatureNorm& norm) {
  j = {{"mean", norm.mean}, {"stddev", norm.stddev}};
}

void from_json(const nlohmann::json& j, FeatureNorm& norm) {
  norm.mean = j.at("mean").get<std::vector<double>>();
  norm.stddev = j.at("stddev").get<std::vector<double>>();
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  const ModelBundle& m = ck.model;
  std::vector<std::pair<std::string, const std::vector<double>*>> tensors = {
      {"gen_params", &m.gen_params}, {"disc_params", &m.disc_params}, {"cls_params", &m.cls_params}};
  for (const auto& t : ck.extra) tensors.emplace_back(t.name, &t.values);

  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, values] : tensors) table.push_back({{"name", name}, {"size", values->size()}});
  const nlohmann::json header = {{"arch", m.arch()},
                                 {"domains", m.domains().labels()},
                                 {"norm", m.norm()},
                                 {"state", ck.state},
                                 {"tensors", table}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  detail::append_le_u32(out, kCheckpointVersion);
  detail::append_le_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, values] : tensors) detail::append_le_f64(out, *values);
  detail::append_le_u32(out, detail::crc32(out));
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kIntegrity, "not a model checkpoint");
  }
  const std::size_t body = bytes.size() - 4;
  if (detail::crc32(bytes.first(body)) != detail::load_le_u32(bytes.data() + body)) {
    throw Error(ErrorCode::kIntegrity, "checkpoint checksum mismatch");
  }
  const std::uint32_t version = detail::load_le_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kIntegrity, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_len = detail::load_le_u64(bytes.data() + 8);
  if (header_len > body - 16) throw Error(ErrorCode::kIntegrity, "checkpoint header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIntegrity, std::string("checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.model = ModelBundle(header.at("arch").get<ArchConfig>(),
                           DomainSet(header.at("domains").get<std::vector<std::string>>()),
                           header.at("norm").get<FeatureNorm>());
    ck.state = header.value("state", nlohmann::json());
    std::size_t offset = 16 + header_len;
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto size = entry.at("size").get<std::size_t>();
      if (size > (body - offset) / 8) throw Error(ErrorCode::kIntegrity, "checkpoint tensor truncated");
      std::vector<double> values(size);
      detail::load_le_f64(bytes.data() + offset, values);
      offset += size * 8;
      std::vector<double>* slot = nullptr;
      if (name == "gen_params") slot = &ck.model.gen_params;
      if (name == "disc_params") slot = &ck.model.disc_params;
      if (name == "cls_params") slot = &ck.model.cls_params;
      if (slot) {
        if (slot->size() != size) {
          throw Error(ErrorCode::kConfigMismatch,
                      "tensor '" + name + "' has " + std::to_string(size) +
                          " values, architecture needs " + std::to_string(slot->size()));
        }
        *slot = std::move(values);
      } else {
        ck.extra.push_back({name, std::move(values)});
      }
    }
    if (offset != body) throw Error(ErrorCode::kIntegrity, "trailing bytes in checkpoint");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIntegrity, std::string("checkpoint header: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  detail::write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file_bytes(path));
}

void save_model(const std::filesystem::path& path, const ModelBundle& model) {
  Checkpoint ck;
  ck.model = model;
  save_checkpoint(path, ck);
}

ModelBundle load_model(const std::filesystem::path& path, const ArchConfig* expected) {
  Checkpoint ck = load_checkpoint(path);
  if (expected && !(*expected == ck.model.arch())) {
    throw Error(ErrorCode::kConfigMismatch, "checkpoint architecture '" + ck.model.arch().name + "' (" +
                                                ck.model.arch().fingerprint() + ") differs from '" +
                                                expected->name + "' (" + expected->fingerprint() + ")");
  }
  return std::move(ck.model);
}

}  // namespace evc
