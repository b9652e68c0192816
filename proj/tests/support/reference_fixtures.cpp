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

#include "reference_fixtures.hpp"

#include <cmath>
#include <string>

#include "evc/error.hpp"

namespace evc::testing {
namespace {

std::vector<std::string> labels() { return DomainSet::defaults().labels(); }

std::string participant(int i) { return "p" + std::to_string(100 + i).substr(1); }

const StimulusEntry& entry(const StimulusIndex& idx, const std::string& phrase, const std::string& s,
                           const std::string& t) {
  for (const auto& e : idx) {
    if (e.phrase_id == phrase && e.source == s && e.target == t) return e;
  }
  throw Error(ErrorCode::kInvalidArgument, "fixture stimulus missing");
}

// Splits `count` answers of one row over its three phrases, listener by listener.
void emit_row(const StimulusIndex& idx, const std::string& s, const std::string& t, const double (&pct)[4],
              std::vector<ResponseRecord>& out) {
  const auto l = labels();
  std::vector<std::string> answers;
  for (std::size_t c = 0; c < 4; ++c) {
    const int n = static_cast<int>(std::lround(pct[c] * 30.0 / 100.0));
    for (int i = 0; i < n; ++i) answers.push_back(l[c]);
  }
  std::size_t a = 0;
  for (int p = 0; p < kClassifyParticipants; ++p) {
    for (const char* phrase : kTestPhrases) {
      out.push_back({participant(p), entry(idx, phrase, s, t).stimulus_id, ResponseTask::kClassify,
                     answers.at(a++), 0, "2026-01-01T00:00:00Z"});
    }
  }
}

}  // namespace

StimulusIndex fixture_index() {
  StimulusIndex idx;
  for (const char* phrase : kTestPhrases) {
    for (const auto& s : labels()) {
      for (const auto& t : labels()) {
        StimulusEntry e;
        e.stimulus_id = stimulus_id(phrase, s, t);
        e.utterance_id = s + "/" + phrase;
        e.phrase_id = phrase;
        e.source = s;
        e.target = t;
        e.kind = s == t ? StimulusKind::kOriginal : StimulusKind::kConverted;
        e.path = (s == t ? "original/" : "converted/") + e.stimulus_id + ".wav";
        idx.push_back(std::move(e));
      }
    }
  }
  return idx;
}

std::vector<ResponseRecord> fixture_classify_responses() {
  const StimulusIndex idx = fixture_index();
  const auto l = labels();
  std::vector<ResponseRecord> out;
  for (std::size_t s = 0; s < 4; ++s) emit_row(idx, l[s], l[s], kOriginalPercent[s], out);
  std::size_t row = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t t = 0; t < 4; ++t) {
      if (s != t) emit_row(idx, l[s], l[t], kConvertedPercent[row++], out);
    }
  }
  return out;
}

std::vector<ResponseRecord> fixture_score_responses(ResponseTask task) {
  const StimulusIndex idx = fixture_index();
  const auto l = labels();
  const auto& table = task == ResponseTask::kMos ? kMos : kEss;
  std::vector<ResponseRecord> out;
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t col = 0; col < 5; ++col) {
      if (col == t) continue;
      const std::size_t s = col == 4 ? t : col;
      const long total = std::lround(table[t][col] * 24.0);
      const long base = total / 24;
      long extra = total % 24;
      for (int p = 0; p < kScoreParticipants; ++p) {
        for (const char* phrase : kTestPhrases) {
          const int score = static_cast<int>(base + (extra-- > 0 ? 1 : 0));
          out.push_back({participant(p), entry(idx, phrase, l[s], l[t]).stimulus_id, task, "", score,
                         "2026-01-01T00:00:00Z"});
        }
      }
    }
  }
  return out;
}

}  // namespace evc::testing
