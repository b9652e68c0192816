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
#include <string>
#include <vector>

#include "evc/audio.hpp"

namespace evc::testing {

// Vowel-sequence "phrases" rendered through formant resonators. Each emotion
// shifts F0 level and range, formant positions, spectral tilt and breathiness
// so the four classes are separable from the spectral envelope alone.
struct ToyCorpusOptions {
  std::vector<std::string> emotions = {"neutral", "joyful", "angry", "sad"};
  std::vector<std::string> phrases = default_phrases();
  int sample_rate = 16000;
  std::uint64_t seed = 7;

  static std::vector<std::string> default_phrases();
};

Waveform synth_toy_utterance(std::size_t phrase, std::size_t emotion, int sample_rate, std::uint64_t seed);

// Writes <root>/<emotion>/<phrase>.wav for every pair; returns the file count.
std::size_t write_toy_corpus(const std::filesystem::path& root, const ToyCorpusOptions& options = {});

}  // namespace evc::testing
