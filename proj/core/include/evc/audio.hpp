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
#include <vector>

namespace evc {

// Mono PCM in [-1, 1]. Multi-channel input is averaged to mono on read.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;
  int bit_depth = 16;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// RIFF/WAVE, integer PCM 8/16/24/32 bit or IEEE float32. Throws
// ErrorCode::kDecode for malformed or truncated files.
Waveform decode_wav(std::span<const std::uint8_t> bytes);
Waveform read_wav(const std::filesystem::path& path);

// 16-bit PCM unless bit_depth says 24 or 32. Samples are clipped to [-1, 1].
std::vector<std::uint8_t> encode_wav(const Waveform& wave);
void write_wav(const std::filesystem::path& path, const Waveform& wave);

// Windowed-sinc (Kaiser) sample-rate conversion.
std::vector<double> resample(std::span<const double> input, int from_rate, int to_rate);

double rms(std::span<const double> samples);
// Scales so that the absolute peak sits at `peak_dbfs`; silent input is returned unchanged.
void peak_normalize(std::vector<double>& samples, double peak_dbfs);

}  // namespace evc
