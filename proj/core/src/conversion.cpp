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

#include "evc/conversion.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "evc/error.hpp"
#include "io_util.hpp"

namespace evc {
namespace {

const DomainF0Stats& stats_for(const F0StatsTable& stats, const std::string& label) {
  auto it = stats.find(label);
  if (it == stats.end()) throw Error(ErrorCode::kStats, "no F0 statistics for domain '" + label + "'");
  return it->second;
}

const char* kind_name(StimulusKind k) { return k == StimulusKind::kOriginal ? "original" : "converted"; }

Waveform finish(std::vector<double> samples, int sample_rate, const ConversionOptions& options) {
  if (options.normalize) peak_normalize(samples, options.peak_dbfs);
  Waveform w;
  w.samples = std::move(samples);
  w.sample_rate = sample_rate;
  w.bit_depth = 16;
  return w;
}

std::size_t output_length(const Waveform& in, int out_rate) {
  if (in.sample_rate == out_rate) return in.samples.size();
  return static_cast<std::size_t>(std::llround(static_cast<double>(in.samples.size()) * out_rate / in.sample_rate));
}

}  // namespace

FeatureSequence convert_features(const FeatureSequence& features, const EmotionDomain& source,
                                 const EmotionDomain& target, const ModelBundle& model,
                                 const F0StatsTable& stats, const ConversionOptions& options) {
  const EmotionDomain src = model.domains().find(source.label);
  const EmotionDomain tgt = model.domains().find(target.label);
  const DomainF0Stats& src_stats = stats_for(stats, src.label);
  const DomainF0Stats& tgt_stats = stats_for(stats, tgt.label);
  features.validate();
  if (features.num_mcc() != model.q()) {
    throw Error(ErrorCode::kShape, "features have Q=" + std::to_string(features.num_mcc()) +
                                       ", model expects Q=" + std::to_string(model.q()));
  }

  FeatureSequence out = features;
  if (features.frames() > 0) {
    const McSegment z = model.norm().standardize(McSegment::from_frames(features.mcc));
    const McSegment y = generate(model, z, DomainCode(tgt.index, model.domains().size()));
    out.mcc = model.norm().destandardize(y).to_frames();
    if (options.pass_through_c0) out.mcc.col(0) = features.mcc.col(0);
  }
  out.f0 = convert_f0(features.f0, src_stats, tgt_stats);
  out.aperiodicity = convert_aperiodicity(features.aperiodicity);
  return out;
}

Waveform convert_utterance(const VocoderBackend& backend, const Waveform& wav, const EmotionDomain& source,
                           const EmotionDomain& target, const ModelBundle& model, const F0StatsTable& stats,
                           const ConversionOptions& options) {
  const FeatureSequence in = analyze(backend, wav.samples, wav.sample_rate, options.analysis);
  const FeatureSequence conv = convert_features(in, source, target, model, stats, options);
  std::vector<double> y = synthesize(backend, conv);
  y.resize(output_length(wav, conv.sample_rate), 0.0);
  return finish(std::move(y), conv.sample_rate, options);
}

std::string stimulus_id(const std::string& phrase_id, const std::string& source, const std::string& target) {
  const std::string key = phrase_id + '\x1f' + source + '\x1f' + target;
  const auto* p = reinterpret_cast<const std::uint8_t*>(key.data());
  const std::uint32_t a = detail::crc32(std::span(p, key.size()));
  const std::string salted = key + "\x1fevc";
  const std::uint32_t b = detail::crc32(std::span(reinterpret_cast<const std::uint8_t*>(salted.data()), salted.size()));
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%08x%08x", a, b);
  return buf;
}

std::string index_to_jsonl(const StimulusIndex& index) {
  std::vector<nlohmann::json> rows;
  rows.reserve(index.size());
  for (const auto& e : index) {
    rows.push_back({{"stimulus_id", e.stimulus_id},
                    {"utterance_id", e.utterance_id},
                    {"phrase_id", e.phrase_id},
                    {"source", e.source},
                    {"target", e.target},
                    {"path", e.path},
                    {"kind", kind_name(e.kind)}});
  }
  return detail::dump_jsonl(rows);
}

StimulusIndex index_from_jsonl(const std::string& text, const std::string& source) {
  StimulusIndex out;
  for (const auto& row : detail::parse_jsonl(text, source)) {
    try {
      StimulusEntry e;
      e.stimulus_id = row.at("stimulus_id").get<std::string>();
      e.utterance_id = row.value("utterance_id", std::string());
      e.phrase_id = row.at("phrase_id").get<std::string>();
      e.source = row.at("source").get<std::string>();
      e.target = row.at("target").get<std::string>();
      e.path = row.at("path").get<std::string>();
      const auto kind = row.value("kind", std::string("converted"));
      if (kind != "original" && kind != "converted") {
        throw Error(ErrorCode::kDecode, source + ": unknown stimulus kind '" + kind + "'");
      }
      e.kind = kind == "original" ? StimulusKind::kOriginal : StimulusKind::kConverted;
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kDecode, source + ": " + ex.what());
    }
  }
  return out;
}

void write_stimulus_index(const std::filesystem::path& path, const StimulusIndex& index) {
  detail::write_file_atomic(path, index_to_jsonl(index));
}

StimulusIndex read_stimulus_index(const std::filesystem::path& path) {
  return index_from_jsonl(detail::read_text_file(path), path.string());
}

BatchResult convert_batch(const VocoderBackend& backend, const Manifest& manifest,
                          const std::vector<EmotionDomain>& targets, const ModelBundle& model,
                          const F0StatsTable& stats, const std::filesystem::path& out_dir,
                          const ConversionOptions& options, bool include_originals) {
  BatchResult result;
  std::filesystem::create_directories(out_dir);
  for (const auto& ref : manifest) {
    Waveform wav;
    FeatureSequence features;
    try {
      wav = read_wav(ref.audio_path);
      features = analyze(backend, wav.samples, wav.sample_rate, options.analysis);
    } catch (const Error& e) {
      for (const auto& t : targets) {
        if (t.label != ref.emotion.label) result.failures.push_back({ref.id, t.label, e.what()});
      }
      continue;
    }

    if (include_originals) {
      StimulusEntry e{stimulus_id(ref.phrase_id, ref.emotion.label, ref.emotion.label),
                      ref.id,
                      ref.phrase_id,
                      ref.emotion.label,
                      ref.emotion.label,
                      "",
                      StimulusKind::kOriginal};
      e.path = "original/" + e.stimulus_id + ".wav";
      std::filesystem::create_directories(out_dir / "original");
      write_wav(out_dir / e.path, finish(wav.samples, wav.sample_rate, options));
      result.index.push_back(std::move(e));
    }

    for (const auto& t : targets) {
      if (t.label == ref.emotion.label) continue;
      try {
        const FeatureSequence conv = convert_features(features, ref.emotion, t, model, stats, options);
        std::vector<double> y = synthesize(backend, conv);
        y.resize(output_length(wav, conv.sample_rate), 0.0);
        StimulusEntry e{stimulus_id(ref.phrase_id, ref.emotion.label, t.label),
                        ref.id,
                        ref.phrase_id,
                        ref.emotion.label,
                        t.label,
                        "",
                        StimulusKind::kConverted};
        e.path = "converted/" + e.stimulus_id + ".wav";
        std::filesystem::create_directories(out_dir / "converted");
        write_wav(out_dir / e.path, finish(std::move(y), conv.sample_rate, options));
        result.index.push_back(std::move(e));
      } catch (const Error& e) {
        result.failures.push_back({ref.id, t.label, e.what()});
      }
    }
  }
  write_stimulus_index(out_dir / "index.jsonl", result.index);
  return result;
}

}  // namespace evc
