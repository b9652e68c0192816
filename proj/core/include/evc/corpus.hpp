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

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evc/domain.hpp"

namespace evc {

struct UtteranceRef {
  std::string id;
  std::string audio_path;
  std::string phrase_id;
  EmotionDomain emotion;
  int sample_rate = 16000;
  int bit_depth = 16;

  friend bool operator==(const UtteranceRef&, const UtteranceRef&) = default;
};

using Manifest = std::vector<UtteranceRef>;

// Maps a path relative to the corpus root onto (phrase_id, emotion). The
// default matches the `<emotion>/<phrase>.wav` layout.
struct LabelRule {
  std::string pattern = R"(^([^/]+)/([^/]+)\.[wW][aA][vV]$)";
  int emotion_group = 1;
  int phrase_group = 2;
};

struct ScanOptions {
  LabelRule rule;
  DomainSet domains = DomainSet::defaults();
  int expected_sample_rate = 16000;
  int expected_bit_depth = 16;
  // Accept other rates; features are resampled to expected_sample_rate at
  // analysis time.
  bool allow_resample = false;
};

struct ScanError {
  std::string path;
  std::string message;
};

struct ScanResult {
  Manifest refs;             // lexicographic by id
  std::vector<ScanError> errors;
  std::size_t skipped = 0;   // matched files whose emotion is outside the domain set
};

// Throws ErrorCode::kEmptyCorpus when nothing decodable matches.
ScanResult scan_corpus(const std::filesystem::path& root, const ScanOptions& options = {});

struct SplitSpec {
  // nullopt: every phrase not listed in test_phrase_ids.
  std::optional<std::set<std::string>> train_phrase_ids;
  std::set<std::string> test_phrase_ids;

  // The three held-out phrases amamizuwa, midori and nami; all others train.
  static SplitSpec defaults();
};

struct Split {
  Manifest train;
  Manifest test;
};

// Throws kMissingPhrase if the split names phrases absent from refs, and
// kUnassignedPhrase if an explicit train set leaves corpus phrases on neither side.
Split make_split(const Manifest& refs, const SplitSpec& spec);

std::string manifest_to_jsonl(const Manifest& manifest);
Manifest manifest_from_jsonl(const std::string& text, const DomainSet& domains,
                             const std::string& source = "manifest");
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path, const DomainSet& domains);

}  // namespace evc
