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

#include "evc/corpus.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include <nlohmann/json.hpp>

#include "evc/audio.hpp"
#include "evc/error.hpp"
#include "io_util.hpp"

namespace evc {

namespace fs = std::filesystem;
using nlohmann::json;

ScanResult scan_corpus(const fs::path& root, const ScanOptions& options) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::kIo, "corpus root is not a directory: " + root.string());
  }
  const std::regex rule(options.rule.pattern);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  ScanResult result;
  for (const auto& file : files) {
    const std::string rel = fs::relative(file, root).generic_string();
    std::smatch m;
    if (!std::regex_match(rel, m, rule)) continue;
    const auto groups = static_cast<int>(m.size()) - 1;
    if (options.rule.emotion_group > groups || options.rule.phrase_group > groups) {
      throw Error(ErrorCode::kConfig, "label rule group index exceeds pattern groups");
    }
    const std::string emotion = m[options.rule.emotion_group].str();
    const std::string phrase = m[options.rule.phrase_group].str();
    if (!options.domains.contains(emotion)) {
      ++result.skipped;
      continue;
    }
    try {
      Waveform wave = read_wav(file);
      if (wave.samples.empty()) throw Error(ErrorCode::kDecode, "no audio samples");
      if (wave.sample_rate != options.expected_sample_rate && !options.allow_resample) {
        throw Error(ErrorCode::kSampleRate,
                    "sample rate " + std::to_string(wave.sample_rate) + " Hz, expected " +
                        std::to_string(options.expected_sample_rate) + " (use --resample)");
      }
      if (wave.bit_depth != options.expected_bit_depth) {
        throw Error(ErrorCode::kDecode, "bit depth " + std::to_string(wave.bit_depth) +
                                            ", expected " +
                                            std::to_string(options.expected_bit_depth));
      }
      UtteranceRef ref;
      ref.id = emotion + "/" + phrase;
      ref.audio_path = file.string();
      ref.phrase_id = phrase;
      ref.emotion = options.domains.find(emotion);
      ref.sample_rate = wave.sample_rate;
      ref.bit_depth = wave.bit_depth;
      result.refs.push_back(std::move(ref));
    } catch (const Error& e) {
      result.errors.push_back({file.string(), e.what()});
    }
  }
  std::sort(result.refs.begin(), result.refs.end(),
            [](const UtteranceRef& a, const UtteranceRef& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < result.refs.size(); ++i) {
    if (result.refs[i].id == result.refs[i - 1].id) {
      throw Error(ErrorCode::kConfig, "label rule produced duplicate id " + result.refs[i].id);
    }
  }
  if (result.refs.empty()) {
    throw Error(ErrorCode::kEmptyCorpus,
                "no decodable utterances under " + root.string() + " (" +
                    std::to_string(result.errors.size()) + " errors)");
  }
  return result;
}

SplitSpec SplitSpec::defaults() {
  SplitSpec spec;
  spec.test_phrase_ids = {"amamizuwa", "midori", "nami"};
  return spec;
}

Split make_split(const Manifest& refs, const SplitSpec& spec) {
  std::set<std::string> phrases;
  for (const auto& r : refs) phrases.insert(r.phrase_id);

  std::vector<std::string> missing;
  auto check = [&](const std::set<std::string>& ids) {
    for (const auto& id : ids) {
      if (!phrases.count(id)) missing.push_back(id);
    }
  };
  check(spec.test_phrase_ids);
  if (spec.train_phrase_ids) {
    check(*spec.train_phrase_ids);
    for (const auto& id : *spec.train_phrase_ids) {
      if (spec.test_phrase_ids.count(id)) {
        throw Error(ErrorCode::kInvalidArgument, "phrase '" + id + "' is in both train and test");
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::kMissingPhrase, "phrases missing from corpus: " + list);
  }

  Split split;
  std::vector<std::string> unassigned;
  for (const auto& r : refs) {
    if (spec.test_phrase_ids.count(r.phrase_id)) {
      split.test.push_back(r);
    } else if (!spec.train_phrase_ids || spec.train_phrase_ids->count(r.phrase_id)) {
      split.train.push_back(r);
    } else if (unassigned.empty() || unassigned.back() != r.phrase_id) {
      unassigned.push_back(r.phrase_id);
    }
  }
  if (!unassigned.empty()) {
    std::sort(unassigned.begin(), unassigned.end());
    unassigned.erase(std::unique(unassigned.begin(), unassigned.end()), unassigned.end());
    std::string list;
    for (const auto& id : unassigned) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::kUnassignedPhrase, "phrases on neither side of the split: " + list);
  }
  return split;
}

std::string manifest_to_jsonl(const Manifest& manifest) {
  std::vector<json> rows;
  rows.reserve(manifest.size());
  for (const auto& r : manifest) {
    rows.push_back({{"id", r.id},
                    {"audio_path", r.audio_path},
                    {"phrase_id", r.phrase_id},
                    {"emotion", r.emotion.label},
                    {"sample_rate", r.sample_rate},
                    {"bit_depth", r.bit_depth}});
  }
  return detail::dump_jsonl(rows);
}

Manifest manifest_from_jsonl(const std::string& text, const DomainSet& domains,
                             const std::string& source) {
  Manifest out;
  std::set<std::string> ids;
  for (const auto& row : detail::parse_jsonl(text, source)) {
    try {
      UtteranceRef r;
      r.id = row.at("id").get<std::string>();
      r.audio_path = row.at("audio_path").get<std::string>();
      r.phrase_id = row.at("phrase_id").get<std::string>();
      r.emotion = domains.find(row.at("emotion").get<std::string>());
      r.sample_rate = row.value("sample_rate", 16000);
      r.bit_depth = row.value("bit_depth", 16);
      if (!ids.insert(r.id).second) {
        throw Error(ErrorCode::kDecode, "duplicate utterance id " + r.id);
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kDecode, source + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  detail::write_file_atomic(path, manifest_to_jsonl(manifest));
}

Manifest read_manifest(const fs::path& path, const DomainSet& domains) {
  return manifest_from_jsonl(detail::read_text_file(path), domains, path.string());
}

}  // namespace evc
