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

#include "toy_corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace evc::testing {
namespace {

struct Vowel {
  std::array<double, 3> formants;
  std::array<double, 3> bandwidths;
};

constexpr std::array<Vowel, 5> kVowels = {{
    {{800, 1200, 2500}, {80, 90, 120}},   // a
    {{300, 2300, 3000}, {60, 100, 120}},  // i
    {{350, 1300, 2300}, {60, 90, 120}},   // u
    {{500, 1900, 2600}, {70, 100, 120}},  // e
    {{500, 900, 2400}, {70, 80, 120}},    // o
}};

struct EmotionStyle {
  double f0_mean;
  double f0_range;     // relative excursion of the contour
  double formant_scale;
  double tilt;         // one-pole lowpass coefficient on the source
  double breath;       // noise-to-pulse ratio
  double rate;         // syllables per second
};

constexpr std::array<EmotionStyle, 4> kStyles = {{
    {120.0, 0.08, 1.00, 0.55, 0.02, 5.0},
    {185.0, 0.25, 1.10, 0.35, 0.02, 6.0},
    {160.0, 0.15, 1.05, 0.10, 0.01, 6.5},
    {100.0, 0.04, 0.93, 0.85, 0.10, 3.8},
}};

// Second-order resonator at (f, bw) with unit DC gain.
struct Resonator {
  double a1 = 0, a2 = 0, g = 1, y1 = 0, y2 = 0;

  void set(double f, double bw, double fs) {
    const double r = std::exp(-std::numbers::pi * bw / fs);
    a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * f / fs);
    a2 = -r * r;
    g = 1.0 - a1 - a2;
  }
  double step(double x) {
    const double y = g * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

std::vector<std::string> ToyCorpusOptions::default_phrases() {
  return {"aki",  "ame",  "aoi",   "haru",      "hana",   "hoshi", "kawa",
          "kaze", "kumo", "mori",  "natsu",     "niji",   "sora",  "tsuki",
          "umi",  "yama", "yuki",  "amamizuwa", "midori", "nami"};
}

Waveform synth_toy_utterance(std::size_t phrase, std::size_t emotion, int fs, std::uint64_t seed) {
  const EmotionStyle& st = kStyles[emotion % kStyles.size()];
  std::mt19937_64 rng(seed * 1000003ULL + phrase * 131ULL + emotion);
  std::normal_distribution<double> noise(0.0, 1.0);

  // Phrase content: a fixed vowel sequence derived from the phrase index.
  const int syllables = 3 + static_cast<int>(phrase % 3);
  std::vector<int> seq;
  for (int s = 0; s < syllables; ++s) seq.push_back(static_cast<int>((phrase * 7 + s * 3) % kVowels.size()));

  const double duration = syllables / st.rate + 0.1;
  const std::size_t n = static_cast<std::size_t>(duration * fs);
  Waveform w;
  w.sample_rate = fs;
  w.samples.assign(n, 0.0);

  std::array<Resonator, 3> res;
  double phase = 0.0, src_lp = 0.0;
  const double onset = 0.03 * fs, offset = n - 0.03 * fs;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double pos = t * st.rate;  // syllable position
    const int syl = std::min(static_cast<int>(pos), syllables - 1);
    const double frac = pos - std::floor(pos);
    const Vowel& v = kVowels[seq[syl]];
    const Vowel& next = kVowels[seq[std::min(syl + 1, syllables - 1)]];
    const double blend = frac > 0.7 ? (frac - 0.7) / 0.3 : 0.0;
    for (int k = 0; k < 3; ++k) {
      const double f = ((1 - blend) * v.formants[k] + blend * next.formants[k]) * st.formant_scale;
      const double bw = (1 - blend) * v.bandwidths[k] + blend * next.bandwidths[k];
      res[k].set(std::min(f, 0.45 * fs), bw, fs);
    }
    // Declining contour with one accent per syllable.
    const double f0 = st.f0_mean * (1.0 + st.f0_range * std::sin(std::numbers::pi * frac) -
                                    0.1 * t / duration);
    phase += f0 / fs;
    double src = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      src = 1.0;
    }
    src += st.breath * noise(rng);
    src_lp = (1.0 - st.tilt) * src + st.tilt * src_lp;
    double y = src_lp;
    for (auto& r : res) y = r.step(y);
    const double env = std::clamp(std::min(i / onset, (n - i) / (n - offset)), 0.0, 1.0);
    w.samples[i] = y * env;
  }
  peak_normalize(w.samples, -3.0);
  return w;
}

std::size_t write_toy_corpus(const std::filesystem::path& root, const ToyCorpusOptions& options) {
  std::size_t count = 0;
  for (std::size_t e = 0; e < options.emotions.size(); ++e) {
    std::filesystem::create_directories(root / options.emotions[e]);
    for (std::size_t p = 0; p < options.phrases.size(); ++p) {
      write_wav(root / options.emotions[e] / (options.phrases[p] + ".wav"),
                synth_toy_utterance(p, e, options.sample_rate, options.seed));
      ++count;
    }
  }
  return count;
}

}  // namespace evc::testing
