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
#include <string>
#include <vector>

#include "evc/audio.hpp"
#include "evc/corpus.hpp"
#include "evc/prosody.hpp"
#include "evc/stargan.hpp"
#include "evc/vocoder.hpp"

namespace evc {

struct ConversionOptions {
  // Keep the source energy coefficient instead of the converted one.
  bool pass_through_c0 = false;
  // Peak-normalize output to peak_dbfs; false keeps the raw synthesis gain.
  bool normalize = true;
  double peak_dbfs = -1.0;
  AnalysisOptions analysis;
};

// MCCs through G (standardized with the model's norm), F0 by log-Gaussian
// normalization, aperiodicity unchanged. Throws kDomain for labels outside
// the model's domain set, kStats for a missing F0 table entry and kShape when
// the feature dimension differs from the model's Q.
FeatureSequence convert_features(const FeatureSequence& features, const EmotionDomain& source,
                                 const EmotionDomain& target, const ModelBundle& model,
                                 const F0StatsTable& stats, const ConversionOptions& options = {});

// Output has exactly the input's sample count.
Waveform convert_utterance(const VocoderBackend& backend, const Waveform& wav, const EmotionDomain& source,
                           const EmotionDomain& target, const ModelBundle& model, const F0StatsTable& stats,
                           const ConversionOptions& options = {});

enum class StimulusKind { kOriginal, kConverted };

struct StimulusEntry {
  std::string stimulus_id;
  std::string utterance_id;
  std::string phrase_id;
  std::string source;
  std::string target;  // equals source for originals
  std::string path;    // relative to the index file's directory
  StimulusKind kind = StimulusKind::kConverted;

  friend bool operator==(const StimulusEntry&, const StimulusEntry&) = default;
};

using StimulusIndex = std::vector<StimulusEntry>;

// Opaque, reproducible id for (phrase, source, target); it does not reveal
// the labels to listeners.
std::string stimulus_id(const std::string& phrase_id, const std::string& source, const std::string& target);

std::string index_to_jsonl(const StimulusIndex& index);
StimulusIndex index_from_jsonl(const std::string& text, const std::string& source = "index");
void write_stimulus_index(const std::filesystem::path& path, const StimulusIndex& index);
StimulusIndex read_stimulus_index(const std::filesystem::path& path);

struct ConversionFailure {
  std::string utterance_id;
  std::string target;
  std::string message;
};

struct BatchResult {
  StimulusIndex index;
  std::vector<ConversionFailure> failures;
};

// For every manifest utterance writes one conversion per target other than
// its own emotion to <out>/converted/<id>.wav and, if include_originals, the
// unconverted audio to <out>/original/<id>.wav. The index goes to
// <out>/index.jsonl. Failing items are reported and skipped.
BatchResult convert_batch(const VocoderBackend& backend, const Manifest& manifest,
                          const std::vector<EmotionDomain>& targets, const ModelBundle& model,
                          const F0StatsTable& stats, const std::filesystem::path& out_dir,
                          const ConversionOptions& options = {}, bool include_originals = true);

}  // namespace evc
