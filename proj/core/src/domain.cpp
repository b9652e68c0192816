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

#include "evc/domain.hpp"

#include <algorithm>
#include <set>

#include "evc/error.hpp"

namespace evc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kEmptyCorpus: return "empty-corpus";
    case ErrorCode::kMissingPhrase: return "missing-phrase";
    case ErrorCode::kUnassignedPhrase: return "unassigned-phrase";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kSampleRate: return "sample-rate";
    case ErrorCode::kTooShort: return "too-short";
    case ErrorCode::kInvalidFeature: return "invalid-feature";
    case ErrorCode::kInvalidEnvelope: return "invalid-envelope";
    case ErrorCode::kBackendMismatch: return "backend-mismatch";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kInsufficientVariance: return "insufficient-variance";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kStats: return "stats";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kConfigMismatch: return "config-mismatch";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kEmptyTable: return "empty-table";
    case ErrorCode::kDuplicate: return "duplicate";
  }
  return "unknown";
}

DomainSet::DomainSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::set<std::string> seen;
  for (const auto& label : labels_) {
    if (label.empty()) throw Error(ErrorCode::kDomain, "empty domain label");
    if (!seen.insert(label).second) {
      throw Error(ErrorCode::kDomain, "duplicate domain label '" + label + "'");
    }
  }
}

DomainSet DomainSet::defaults() { return DomainSet({"neutral", "joyful", "angry", "sad"}); }

bool DomainSet::contains(std::string_view label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

EmotionDomain DomainSet::at(std::size_t index) const {
  if (index >= labels_.size()) {
    throw Error(ErrorCode::kDomain, "domain index " + std::to_string(index) + " out of range");
  }
  return {labels_[index], index};
}

EmotionDomain DomainSet::find(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw Error(ErrorCode::kDomain, "unknown emotion domain '" + std::string(label) + "'");
  }
  return {*it, static_cast<std::size_t>(it - labels_.begin())};
}

std::vector<EmotionDomain> DomainSet::domains() const {
  std::vector<EmotionDomain> out;
  out.reserve(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) out.push_back({labels_[i], i});
  return out;
}

DomainCode::DomainCode(std::size_t index, std::size_t num_domains)
    : index_(index), size_(num_domains) {
  if (num_domains == 0 || index >= num_domains) {
    throw Error(ErrorCode::kInvalidArgument, "domain code index out of range");
  }
}

DomainCode DomainCode::from_vector(std::span<const double> onehot) {
  std::size_t ones = 0;
  std::size_t hot = 0;
  for (std::size_t k = 0; k < onehot.size(); ++k) {
    if (onehot[k] == 1.0) {
      ++ones;
      hot = k;
    } else if (onehot[k] != 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "domain code entries must be 0 or 1");
    }
  }
  if (ones != 1) {
    throw Error(ErrorCode::kInvalidArgument, "domain code must contain exactly one 1");
  }
  return DomainCode(hot, onehot.size());
}

std::vector<double> DomainCode::onehot() const {
  std::vector<double> v(size_, 0.0);
  v[index_] = 1.0;
  return v;
}

}  // namespace evc
