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

#include "evc/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "evc/error.hpp"
#include "io_util.hpp"

namespace evc {
namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::kDecode, "wav: " + what); }

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 50; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-12 * sum) break;
  }
  return sum;
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) bad("file shorter than RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    bad("missing RIFF/WAVE signature");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    std::uint32_t size = le32(chunk + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) bad("truncated fmt chunk");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible && size >= 40) format = le16(chunk + 32);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) bad("truncated data chunk");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) bad("missing fmt chunk");
  if (data == nullptr) bad("missing data chunk");
  if (channels == 0 || rate == 0) bad("invalid channel count or sample rate");
  if (format == kFormatPcm) {
    if (bits != 8 && bits != 16 && bits != 24 && bits != 32) bad("unsupported PCM bit depth");
  } else if (format == kFormatFloat) {
    if (bits != 32) bad("unsupported float bit depth");
  } else {
    bad("unsupported sample format " + std::to_string(format));
  }
  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;

  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  wave.bit_depth = bits;
  wave.samples.resize(frames);
  for (std::size_t n = 0; n < frames; ++n) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const std::uint8_t* s = data + n * frame_bytes + ch * bytes_per_sample;
      double v = 0.0;
      if (format == kFormatFloat) {
        std::uint32_t raw = le32(s);
        float f;
        std::memcpy(&f, &raw, sizeof f);
        v = f;
      } else if (bits == 8) {
        v = (static_cast<int>(s[0]) - 128) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(le16(s)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t raw = static_cast<std::int32_t>(s[0] | (s[1] << 8) | (s[2] << 16));
        if (raw & 0x800000) raw -= 0x1000000;
        v = raw / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(le32(s)) / 2147483648.0;
      }
      acc += v;
    }
    wave.samples[n] = acc / channels;
  }
  return wave;
}

Waveform read_wav(const std::filesystem::path& path) {
  auto bytes = detail::read_file_bytes(path);
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const Waveform& wave) {
  const int bits = (wave.bit_depth == 24 || wave.bit_depth == 32) ? wave.bit_depth : 16;
  const std::uint32_t bytes_per_sample = bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(wave.samples.size() * bytes_per_sample);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put32(out, static_cast<std::uint32_t>(wave.sample_rate) * bytes_per_sample);
  put16(out, static_cast<std::uint16_t>(bytes_per_sample));
  put16(out, static_cast<std::uint16_t>(bits));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_size);
  const double scale = std::ldexp(1.0, bits - 1);
  const double max_code = scale - 1.0;
  for (double s : wave.samples) {
    double v = std::clamp(s, -1.0, 1.0) * scale;
    auto code = static_cast<std::int64_t>(std::lround(std::clamp(v, -scale, max_code)));
    auto u = static_cast<std::uint32_t>(code);
    for (std::uint32_t b = 0; b < bytes_per_sample; ++b) {
      out.push_back(static_cast<std::uint8_t>((u >> (8 * b)) & 0xff));
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  detail::write_file_atomic(path, encode_wav(wave));
}

std::vector<double> resample(std::span<const double> input, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "resample: rates must be positive");
  }
  std::vector<double> in(input.begin(), input.end());
  if (from_rate == to_rate || in.empty()) return in;
  const double ratio = static_cast<double>(to_rate) / from_rate;
  const double cutoff = std::min(1.0, ratio) * 0.95;
  constexpr int kHalfTaps = 32;
  constexpr double kBeta = 8.6;
  const double half_width = kHalfTaps / std::min(1.0, ratio);
  const auto out_len = static_cast<std::size_t>(std::floor(in.size() * ratio));
  const double i0_beta = bessel_i0(kBeta);
  std::vector<double> out(out_len, 0.0);
  for (std::size_t m = 0; m < out_len; ++m) {
    const double t = m / ratio;
    const auto lo = static_cast<long>(std::ceil(t - half_width));
    const auto hi = static_cast<long>(std::floor(t + half_width));
    double acc = 0.0;
    for (long n = std::max(0L, lo); n <= std::min<long>(hi, static_cast<long>(in.size()) - 1); ++n) {
      const double d = t - n;
      const double r = d / half_width;
      if (std::abs(r) >= 1.0) continue;
      const double window = bessel_i0(kBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      const double x = M_PI * cutoff * d;
      const double sinc = (std::abs(x) < 1e-12) ? 1.0 : std::sin(x) / x;
      acc += in[n] * cutoff * sinc * window;
    }
    out[m] = acc;
  }
  return out;
}

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = std::inner_product(samples.begin(), samples.end(), samples.begin(), 0.0);
  return std::sqrt(acc / samples.size());
}

void peak_normalize(std::vector<double>& samples, double peak_dbfs) {
  double peak = 0.0;
  for (double s : samples) peak = std::max(peak, std::abs(s));
  if (peak <= 0.0) return;
  const double gain = std::pow(10.0, peak_dbfs / 20.0) / peak;
  for (double& s : samples) s *= gain;
}

}  // namespace evc
