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

#include <cmath>
#include <map>
#include <mutex>

#include <fftw3.h>

#include "evc/error.hpp"
#include "evc/vocoder.hpp"

namespace evc {
namespace {

// DCT-I plans keyed by length. The FFTW planner is not reentrant; execution
// through fftw_execute_r2r on caller-owned buffers is.
class Dct1Plans {
 public:
  static Dct1Plans& instance() {
    static Dct1Plans plans;
    return plans;
  }

  void execute(std::vector<double>& in, std::vector<double>& out) {
    const int n = static_cast<int>(in.size());
    fftw_plan plan = nullptr;
    {
      std::lock_guard lock(mutex_);
      auto it = plans_.find(n);
      if (it == plans_.end()) {
        std::vector<double> a(n), b(n);
        plan = fftw_plan_r2r_1d(n, a.data(), b.data(), FFTW_REDFT00, FFTW_ESTIMATE);
        plans_.emplace(n, plan);
      } else {
        plan = it->second;
      }
    }
    out.resize(in.size());
    fftw_execute_r2r(plan, in.data(), out.data());
  }

  ~Dct1Plans() {
    for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<int, fftw_plan> plans_;
};

void check_warp(double warp) {
  if (!(warp > 0.0 && warp < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "warp must lie in (0, 1)");
  }
}

}  // namespace

std::vector<double> warp_cepstrum(std::span<const double> cepstrum, int out_order, double warp) {
  const int m1 = static_cast<int>(cepstrum.size()) - 1;
  const double b = 1.0 - warp * warp;
  std::vector<double> g(out_order + 1, 0.0), d(out_order + 1, 0.0);
  for (int i = -m1; i <= 0; ++i) {
    d = g;
    g[0] = cepstrum[-i] + warp * d[0];
    if (out_order >= 1) g[1] = b * d[0] + warp * d[1];
    for (int j = 2; j <= out_order; ++j) g[j] = d[j - 1] + warp * (d[j] - g[j - 1]);
  }
  return g;
}

RowMatrix mcc_from_envelope(const RowMatrix& envelope, int q, double warp) {
  if (q < 1) throw Error(ErrorCode::kInvalidArgument, "mel-cepstrum dimension must be >= 1");
  check_warp(warp);
  const auto bins = static_cast<int>(envelope.cols());
  if (bins < 2) throw Error(ErrorCode::kInvalidEnvelope, "envelope needs at least 2 bins");
  const int fft_size = 2 * (bins - 1);
  RowMatrix out(envelope.rows(), q);
  std::vector<double> log_spec(bins), cep(bins);
  for (Eigen::Index n = 0; n < envelope.rows(); ++n) {
    for (int k = 0; k < bins; ++k) {
      const double v = envelope(n, k);
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidEnvelope, "envelope values must be positive and finite");
      }
      log_spec[k] = std::log(v);
    }
    Dct1Plans::instance().execute(log_spec, cep);
    for (double& c : cep) c /= fft_size;
    // Causal (minimum-phase) cepstrum of the amplitude response.
    cep[0] *= 0.5;
    cep[bins - 1] *= 0.5;
    auto mc = warp_cepstrum(cep, q - 1, warp);
    for (int i = 0; i < q; ++i) out(n, i) = mc[i];
  }
  return out;
}

RowMatrix envelope_from_mcc(const RowMatrix& mcc, int fft_size, double warp) {
  check_warp(warp);
  if (fft_size < 2 || fft_size % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "fft size must be even and >= 2");
  }
  const int bins = fft_size / 2 + 1;
  RowMatrix out(mcc.rows(), bins);
  std::vector<double> mc(mcc.cols()), spec(bins);
  for (Eigen::Index n = 0; n < mcc.rows(); ++n) {
    for (Eigen::Index i = 0; i < mcc.cols(); ++i) mc[i] = mcc(n, i);
    auto cep = warp_cepstrum(mc, bins - 1, -warp);
    cep[0] *= 2.0;
    cep[bins - 1] *= 2.0;
    Dct1Plans::instance().execute(cep, spec);
    for (int k = 0; k < bins; ++k) out(n, k) = std::exp(spec[k]);
  }
  return out;
}

double log_spectral_distortion_db(const RowMatrix& reference, const RowMatrix& test) {
  if (reference.rows() != test.rows() || reference.cols() != test.cols()) {
    throw Error(ErrorCode::kShape, "spectral distortion requires equal shapes");
  }
  if (reference.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index n = 0; n < reference.rows(); ++n) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < reference.cols(); ++k) {
      const double d = 10.0 * std::log10(reference(n, k) / test(n, k));
      acc += d * d;
    }
    total += std::sqrt(acc / reference.cols());
  }
  return total / reference.rows();
}

}  // namespace evc
