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

#include <random>
#include <string>
#include <vector>

#include "evc/training.hpp"

namespace evc::testing {

// Random MCC-like utterances whose domain shifts a few coefficients, so a
// classifier has something to learn.
inline std::vector<TrainingUtterance> synthetic_utterances(int per_domain, int k, int q, int frames,
                                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<TrainingUtterance> out;
  for (int d = 0; d < k; ++d) {
    for (int i = 0; i < per_domain; ++i) {
      RowMatrix x(q, frames);
      for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = 0.3 * nd(rng);
      x.row(0).array() += -2.0 + 0.5 * d;
      x.row(1 + d % (q - 1)).array() += 1.5;
      out.push_back({"d" + std::to_string(d) + "/u" + std::to_string(i), McSegment(x), static_cast<std::size_t>(d)});
    }
  }
  return out;
}

}  // namespace evc::testing
