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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace evc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-utterance vocoder parameters. Streams are frame-major: row n of `mcc`
// and `aperiodicity` belongs to f0[n].
struct FeatureSequence {
  std::vector<double> f0;   // Hz, 0 = unvoiced
  RowMatrix mcc;            // N x Q
  RowMatrix aperiodicity;   // N x B, carried opaquely
  double frame_period = 5.0;
  int sample_rate = 16000;
  double warp = 0.42;
  std::string backend;

  std::size_t frames() const { return f0.size(); }
  int num_mcc() const { return static_cast<int>(mcc.cols()); }
  int num_bands() const { return static_cast<int>(aperiodicity.cols()); }
  // The envelope resolution used by the backend: B = fft_size / 2 + 1.
  int fft_size() const { return 2 * (num_bands() - 1); }

  // Throws kInvalidFeature on misaligned streams, negative F0 or non-finite values.
  void validate() const;
};

enum class F0Method { kHarvest, kDio };

struct AnalysisOptions {
  double frame_period = 5.0;
  int num_mcc = 36;
  double warp = 0.42;
  double f0_floor = 71.0;
  double f0_ceil = 800.0;
  F0Method f0_method = F0Method::kHarvest;
  // Input at another rate is refused (kSampleRate) unless `resample` is set;
  // 0 accepts any rate.
  int expected_sample_rate = 16000;
  bool resample = false;
};

// What a backend produces before mel-cepstral reduction.
struct VocoderFrames {
  std::vector<double> f0;
  RowMatrix envelope;       // N x (fft_size/2+1), power spectrum
  RowMatrix aperiodicity;   // N x B
  int fft_size = 0;
};

class VocoderBackend {
 public:
  virtual ~VocoderBackend() = default;
  virtual std::string id() const = 0;
  virtual VocoderFrames analyze(std::span<const double> waveform, int sample_rate,
                                const AnalysisOptions& options) const = 0;
  virtual std::vector<double> synthesize(std::span<const double> f0, const RowMatrix& envelope,
                                         const RowMatrix& aperiodicity, int sample_rate,
                                         double frame_period) const = 0;
};

// WORLD: Harvest (or DIO + StoneMask) for F0, CheapTrick, D4C, and the WORLD
// synthesizer. Stateless, safe to share across threads.
class WorldBackend final : public VocoderBackend {
 public:
  explicit WorldBackend(F0Method method = F0Method::kHarvest) : method_(method) {}
  std::string id() const override;
  VocoderFrames analyze(std::span<const double> waveform, int sample_rate,
                        const AnalysisOptions& options) const override;
  std::vector<double> synthesize(std::span<const double> f0, const RowMatrix& envelope,
                                 const RowMatrix& aperiodicity, int sample_rate,
                                 double frame_period) const override;

 private:
  F0Method method_;
};

std::unique_ptr<VocoderBackend> make_backend(F0Method method);

// Throws kTooShort for waveforms shorter than one frame and kSampleRate when
// `sample_rate` differs from `expected_rate` (if given).
FeatureSequence analyze(const VocoderBackend& backend, std::span<const double> waveform,
                        int sample_rate, const AnalysisOptions& options = {});

// Output has N * frame_period worth of samples. Throws kInvalidFeature on NaN/Inf.
std::vector<double> synthesize(const VocoderBackend& backend, const FeatureSequence& features);

// Mel-cepstrum of order q-1 from a power-spectrum envelope (one frame per row,
// fft_size/2+1 bins) under all-pass warping `warp`. Throws kInvalidEnvelope for
// non-positive bins and kInvalidArgument for q < 1 or warp outside (0, 1).
RowMatrix mcc_from_envelope(const RowMatrix& envelope, int q, double warp);
RowMatrix envelope_from_mcc(const RowMatrix& mcc, int fft_size, double warp);

// All-pass frequency warping of a cepstrum (SPTK freqt recursion).
std::vector<double> warp_cepstrum(std::span<const double> cepstrum, int out_order, double warp);

// Mean over frames of the RMS log-spectral difference in dB.
double log_spectral_distortion_db(const RowMatrix& reference, const RowMatrix& test);

// Feature cache layout (all integers little-endian):
//   bytes 0..3   "EVCF"
//   bytes 4..7   uint32 format version (1)
//   bytes 8..11  uint32 header length H
//   H bytes      UTF-8 JSON {"N","Q","B","frame_period","sample_rate","warp","backend"}
//   float64[N]   f0
//   float64[N*Q] mcc, frame-major
//   float64[N*B] aperiodicity, frame-major
//   uint32       CRC-32 of everything above
inline constexpr std::uint32_t kFeatureCacheVersion = 1;

std::vector<std::uint8_t> encode_feature_cache(const FeatureSequence& features);
FeatureSequence decode_feature_cache(std::span<const std::uint8_t> bytes);
void write_feature_cache(const std::filesystem::path& path, const FeatureSequence& features);
// Throws kBackendMismatch if `expected_backend` is given and differs from the header.
FeatureSequence read_feature_cache(const std::filesystem::path& path,
                                   const std::optional<std::string>& expected_backend = std::nullopt);

// Cache file name for an utterance id ("angry/midori" -> "angry__midori.evcf").
std::string feature_cache_name(const std::string& utterance_id);

}  // namespace evc
