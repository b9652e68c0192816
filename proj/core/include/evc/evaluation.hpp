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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evc/conversion.hpp"
#include "evc/domain.hpp"
#include "evc/stargan.hpp"
#include "evc/vocoder.hpp"

namespace evc {

// Mean over frames of (10 / ln 10) * sqrt(2) * ||a_n - b_n||_2, coefficients
// from 1 when exclude_c0. Throws kShape unless shapes match.
double mcd(const McSegment& a, const McSegment& b, bool exclude_c0 = true);

// Half-up rounding to `decimals` places, tolerant of binary noise just below .5.
double round_half_up(double value, int decimals);

enum class ResponseTask { kClassify, kMos, kEss };

std::string task_name(ResponseTask task);
// Throws kInvalidArgument for anything but classify, mos or ess.
ResponseTask parse_task(const std::string& name);

struct ResponseRecord {
  std::string participant_id;
  std::string stimulus_id;
  ResponseTask task = ResponseTask::kClassify;
  std::string label;  // classify
  int score = 0;      // mos, ess
  std::string timestamp;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

// Throws kInvalidArgument: empty ids, a label outside `domains`, or a score outside 1..5.
void validate_response(const ResponseRecord& record, const DomainSet& domains);

nlohmann::json response_to_json(const ResponseRecord& record);
ResponseRecord response_from_json(const nlohmann::json& j);
std::vector<ResponseRecord> responses_from_jsonl(const std::string& text, const DomainSet& domains,
                                                 const std::string& source = "responses");
std::vector<ResponseRecord> read_responses(const std::filesystem::path& path, const DomainSet& domains);
// Appends one line; the file is never rewritten.
void append_response(const std::filesystem::path& path, const ResponseRecord& record);

struct ConfusionRow {
  std::string source;
  std::string target;
  std::vector<std::size_t> counts;  // per column label
  std::size_t total = 0;
  std::vector<double> percent;      // unrounded; empty when the row has no data
};

// Rows are categories (originals), (source, target) pairs (conversions) or
// targets (averaged over sources). Columns are the K domain labels.
struct ConfusionTable {
  enum class Layout { kOriginal, kSourceTarget, kTarget };
  Layout layout = Layout::kOriginal;
  std::vector<std::string> labels;
  std::vector<ConfusionRow> rows;

  const ConfusionRow* find(const std::string& source, const std::string& target) const;
};

struct ClassificationTables {
  ConfusionTable original;
  ConfusionTable converted;
  ConfusionTable averaged;
};

// Per target, the unrounded mean percentage of the (source, target) rows that have data.
ConfusionTable average_over_sources(const ConfusionTable& converted);

// Tabulates classify responses against the index. Throws kEmptyTable when no
// classify response refers to the index and kInvalidArgument for unknown stimuli.
ClassificationTables aggregate_classification(const std::vector<ResponseRecord>& responses,
                                              const StimulusIndex& index, const DomainSet& domains);

struct PredictedStimulus {
  std::string source;
  std::string target;
  std::string predicted;
};

// Converted-data layout (every ordered source != target pair) from machine labels.
ConfusionTable objective_confusion(const std::vector<PredictedStimulus>& predictions, const DomainSet& domains);

// Classifies every converted stimulus of `index` (paths relative to
// index_dir) with the classifier network of `classifier`.
std::vector<PredictedStimulus> classify_stimuli(const StimulusIndex& index, const std::filesystem::path& index_dir,
                                                const ModelBundle& classifier, const VocoderBackend& backend,
                                                const AnalysisOptions& analysis = {});

// Fraction of predictions equal to their target.
double target_accuracy(const std::vector<PredictedStimulus>& predictions);

struct ScoreCell {
  std::size_t count = 0;
  std::optional<double> mean;  // absent when count == 0
};

// Rows are targets; columns are sources, plus the original-speech column.
struct ScoreTable {
  ResponseTask task = ResponseTask::kMos;
  std::vector<std::string> labels;
  std::vector<std::vector<ScoreCell>> cells;  // [target][source]
  std::vector<ScoreCell> original;            // [emotion]
  std::optional<double> converted_mean;       // mean of the present converted cells
  std::optional<double> original_mean;        // mean of the present original cells
};

// Throws kEmptyTable when no response of `task` refers to the index.
ScoreTable aggregate_scores(const std::vector<ResponseRecord>& responses, const StimulusIndex& index,
                            const DomainSet& domains, ResponseTask task);

std::string to_csv(const ConfusionTable& table);
std::string to_markdown(const ConfusionTable& table);
std::string to_csv(const ScoreTable& table);
std::string to_markdown(const ScoreTable& table);
nlohmann::json table_to_json(const ConfusionTable& table);
nlohmann::json table_to_json(const ScoreTable& table);

}  // namespace evc
