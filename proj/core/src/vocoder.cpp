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

#include "evc/vocoder.hpp"

#include "evc/audio.hpp"

#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "evc/error.hpp"
#include "io_util.hpp"
#include "world/cheaptrick.h"
#include "world/d4c.h"
#include "world/dio.h"
#include "world/harvest.h"
#include "world/stonemask.h"
#include "world/synthesis.h"

namespace evc {
namespace {

std::vector<double*> row_pointers(RowMatrix& m) {
  std::vector<double*> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows[i] = m.row(i).data();
  return rows;
}

std::vector<const double*> row_pointers(const RowMatrix& m) {
  std::vector<const double*> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows[i] = m.row(i).data();
  return rows;
}

bool all_finite(const RowMatrix& m) { return m.allFinite(); }

}  // namespace

void FeatureSequence::validate() const {
  const auto n = static_cast<Eigen::Index>(f0.size());
  if (mcc.rows() != n || aperiodicity.rows() != n) {
    throw Error(ErrorCode::kInvalidFeature, "f0, mcc and aperiodicity streams differ in length");
  }
  for (double v : f0) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidFeature, "f0 must be finite and non-negative");
    }
  }
  if (!all_finite(mcc)) throw Error(ErrorCode::kInvalidFeature, "non-finite mel-cepstrum");
  if (!all_finite(aperiodicity)) throw Error(ErrorCode::kInvalidFeature, "non-finite aperiodicity");
  if (n > 0 && (aperiodicity.minCoeff() < 0.0 || aperiodicity.maxCoeff() > 1.0)) {
    throw Error(ErrorCode::kInvalidFeature, "aperiodicity outside [0, 1]");
  }
  if (!(frame_period > 0.0) || sample_rate <= 0) {
    throw Error(ErrorCode::kInvalidFeature, "invalid frame period or sample rate");
  }
  if (num_bands() < 2 && n > 0) {
    throw Error(ErrorCode::kInvalidFeature, "aperiodicity needs at least two bins");
  }
}

std::string WorldBackend::id() const {
  return method_ == F0Method::kHarvest ? "world-0.3.5/harvest+cheaptrick+d4c"
                                       : "world-0.3.5/dio+stonemask+cheaptrick+d4c";
}

VocoderFrames WorldBackend::analyze(std::span<const double> waveform, int sample_rate,
                                    const AnalysisOptions& options) const {
  const int length = static_cast<int>(waveform.size());
  VocoderFrames out;
  std::vector<double> times;
  if (method_ == F0Method::kHarvest) {
    HarvestOption opt;
    InitializeHarvestOption(&opt);
    opt.frame_period = options.frame_period;
    opt.f0_floor = options.f0_floor;
    opt.f0_ceil = options.f0_ceil;
    const int frames = GetSamplesForHarvest(sample_rate, length, options.frame_period);
    times.resize(frames);
    out.f0.resize(frames);
    Harvest(waveform.data(), length, sample_rate, &opt, times.data(), out.f0.data());
  } else {
    DioOption opt;
    InitializeDioOption(&opt);
    opt.frame_period = options.frame_period;
    opt.f0_floor = options.f0_floor;
    opt.f0_ceil = options.f0_ceil;
    const int frames = GetSamplesForDIO(sample_rate, length, options.frame_period);
    times.resize(frames);
    std::vector<double> coarse(frames);
    Dio(waveform.data(), length, sample_rate, &opt, times.data(), coarse.data());
    out.f0.resize(frames);
    StoneMask(waveform.data(), length, sample_rate, times.data(), coarse.data(), frames,
              out.f0.data());
  }
  const int frames = static_cast<int>(out.f0.size());

  CheapTrickOption ct;
  InitializeCheapTrickOption(sample_rate, &ct);
  ct.f0_floor = options.f0_floor;
  ct.fft_size = GetFFTSizeForCheapTrick(sample_rate, &ct);
  out.fft_size = ct.fft_size;
  const int bins = ct.fft_size / 2 + 1;
  out.envelope = RowMatrix::Zero(frames, bins);
  auto env_rows = row_pointers(out.envelope);
  CheapTrick(waveform.data(), length, sample_rate, times.data(), out.f0.data(), frames, &ct,
             env_rows.data());

  D4COption d4c;
  InitializeD4COption(&d4c);
  out.aperiodicity = RowMatrix::Zero(frames, bins);
  auto ap_rows = row_pointers(out.aperiodicity);
  D4C(waveform.data(), length, sample_rate, times.data(), out.f0.data(), frames, ct.fft_size,
      &d4c, ap_rows.data());
  return out;
}

std::vector<double> WorldBackend::synthesize(std::span<const double> f0, const RowMatrix& envelope,
                                             const RowMatrix& aperiodicity, int sample_rate,
                                             double frame_period) const {
  const int frames = static_cast<int>(f0.size());
  const int fft_size = 2 * (static_cast<int>(envelope.cols()) - 1);
  const auto length = static_cast<int>(std::lround(frames * frame_period * sample_rate / 1000.0));
  std::vector<double> y(static_cast<std::size_t>(length), 0.0);
  if (frames == 0) return y;
  auto env_rows = row_pointers(envelope);
  auto ap_rows = row_pointers(aperiodicity);
  Synthesis(f0.data(), frames, env_rows.data(), ap_rows.data(), fft_size, frame_period, sample_rate,
            length, y.data());
  return y;
}

std::unique_ptr<VocoderBackend> make_backend(F0Method method) {
  return std::make_unique<WorldBackend>(method);
}

FeatureSequence analyze(const VocoderBackend& backend, std::span<const double> waveform,
                        int sample_rate, const AnalysisOptions& options) {
  if (sample_rate <= 0) throw Error(ErrorCode::kSampleRate, "sample rate must be positive");
  std::vector<double> resampled;
  if (options.expected_sample_rate > 0 && sample_rate != options.expected_sample_rate) {
    if (!options.resample) {
      throw Error(ErrorCode::kSampleRate, "sample rate " + std::to_string(sample_rate) + " Hz, expected " +
                                              std::to_string(options.expected_sample_rate));
    }
    resampled = resample(waveform, sample_rate, options.expected_sample_rate);
    waveform = resampled;
    sample_rate = options.expected_sample_rate;
  }
  const double frame_samples = options.frame_period * sample_rate / 1000.0;
  if (waveform.empty() || static_cast<double>(waveform.size()) < frame_samples) {
    throw Error(ErrorCode::kTooShort, "waveform shorter than one analysis frame");
  }
  for (double s : waveform) {
    if (!std::isfinite(s)) throw Error(ErrorCode::kInvalidArgument, "non-finite audio sample");
  }
  VocoderFrames frames = backend.analyze(waveform, sample_rate, options);
  FeatureSequence out;
  out.f0 = std::move(frames.f0);
  out.mcc = mcc_from_envelope(frames.envelope, options.num_mcc, options.warp);
  out.aperiodicity = std::move(frames.aperiodicity);
  out.frame_period = options.frame_period;
  out.sample_rate = sample_rate;
  out.warp = options.warp;
  out.backend = backend.id();
  return out;
}

std::vector<double> synthesize(const VocoderBackend& backend, const FeatureSequence& features) {
  features.validate();
  if (features.frames() == 0) return {};
  RowMatrix envelope = envelope_from_mcc(features.mcc, features.fft_size(), features.warp);
  if (!envelope.allFinite()) {
    throw Error(ErrorCode::kInvalidFeature, "mel-cepstrum decodes to a non-finite envelope");
  }
  return backend.synthesize(features.f0, envelope, features.aperiodicity, features.sample_rate,
                            features.frame_period);
}

std::vector<std::uint8_t> encode_feature_cache(const FeatureSequence& f) {
  f.validate();
  nlohmann::json header = {{"N", f.frames()},
                           {"Q", f.num_mcc()},
                           {"B", f.num_bands()},
                           {"frame_period", f.frame_period},
                           {"sample_rate", f.sample_rate},
                           {"warp", f.warp},
                           {"backend", f.backend}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'E', 'V', 'C', 'F'});
  detail::append_le_u32(out, kFeatureCacheVersion);
  detail::append_le_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  detail::append_le_f64(out, f.f0);
  detail::append_le_f64(out, std::span(f.mcc.data(), static_cast<std::size_t>(f.mcc.size())));
  detail::append_le_f64(out, std::span(f.aperiodicity.data(),
                                       static_cast<std::size_t>(f.aperiodicity.size())));
  detail::append_le_u32(out, detail::crc32(out));
  return out;
}

FeatureSequence decode_feature_cache(std::span<const std::uint8_t> bytes) {
  auto fail = [](const std::string& what) -> Error {
    return Error(ErrorCode::kIntegrity, "feature cache: " + what);
  };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "EVCF", 4) != 0) throw fail("bad magic");
  if (detail::load_le_u32(bytes.data() + 4) != kFeatureCacheVersion) {
    throw fail("unsupported version");
  }
  const std::uint32_t stored_crc = detail::load_le_u32(bytes.data() + bytes.size() - 4);
  if (detail::crc32(bytes.first(bytes.size() - 4)) != stored_crc) throw fail("checksum mismatch");
  const std::uint32_t header_len = detail::load_le_u32(bytes.data() + 8);
  if (12 + static_cast<std::size_t>(header_len) > bytes.size() - 4) throw fail("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  FeatureSequence f;
  std::size_t n = 0, q = 0, b = 0;
  try {
    n = header.at("N").get<std::size_t>();
    q = header.at("Q").get<std::size_t>();
    b = header.at("B").get<std::size_t>();
    f.frame_period = header.at("frame_period").get<double>();
    f.sample_rate = header.at("sample_rate").get<int>();
    f.warp = header.at("warp").get<double>();
    f.backend = header.at("backend").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  const std::size_t payload = (n + n * q + n * b) * sizeof(double);
  if (12 + header_len + payload + 4 != bytes.size()) throw fail("payload size mismatch");
  const std::uint8_t* p = bytes.data() + 12 + header_len;
  f.f0.resize(n);
  detail::load_le_f64(p, f.f0);
  p += n * sizeof(double);
  f.mcc.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  detail::load_le_f64(p, std::span(f.mcc.data(), n * q));
  p += n * q * sizeof(double);
  f.aperiodicity.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(b));
  detail::load_le_f64(p, std::span(f.aperiodicity.data(), n * b));
  f.validate();
  return f;
}

void write_feature_cache(const std::filesystem::path& path, const FeatureSequence& features) {
  detail::write_file_atomic(path, encode_feature_cache(features));
}

FeatureSequence read_feature_cache(const std::filesystem::path& path,
                                   const std::optional<std::string>& expected_backend) {
  auto bytes = detail::read_file_bytes(path);
  FeatureSequence f;
  try {
    f = decode_feature_cache(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  if (expected_backend && f.backend != *expected_backend) {
    throw Error(ErrorCode::kBackendMismatch, path.string() + ": cache was written by backend '" +
                                                 f.backend + "', expected '" + *expected_backend +
                                                 "'");
  }
  return f;
}

std::string feature_cache_name(const std::string& utterance_id) {
  std::string name;
  for (char c : utterance_id) {
    if (c == '/' || c == '\\') {
      name += "__";
    } else if (c == ':' || c == ' ') {
      name += '_';
    } else {
      name += c;
    }
  }
  return name + ".evcf";
}

}  // namespace evc
