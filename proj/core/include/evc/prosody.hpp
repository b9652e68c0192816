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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "evc/domain.hpp"
#include "evc/vocoder.hpp"

namespace evc {

// Natural-log F0 statistics over voiced frames; sigma is the population
// standard deviation.
struct DomainF0Stats {
  EmotionDomain domain;
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t n_frames = 0;
};

// Throws kInsufficientData for fewer than 2 voiced frames and
// kInsufficientVariance when sigma would be 0.
DomainF0Stats estimate_f0_stats(std::span<const FeatureSequence> features, const EmotionDomain& domain);
DomainF0Stats estimate_f0_stats(std::span<const std::vector<double>> f0_streams,
                                const EmotionDomain& domain);

// Log-domain linear transform mapping source statistics onto target ones.
// Unvoiced frames (0) stay 0.
std::vector<double> convert_f0(std::span<const double> f0, const DomainF0Stats& source,
                               const DomainF0Stats& target);

// Aperiodicity is carried through unchanged.
RowMatrix convert_aperiodicity(const RowMatrix& aperiodicity);

using F0StatsTable = std::map<std::string, DomainF0Stats>;

// JSON array of {domain, mu, sigma, n_frames}.
std::string f0_stats_to_json(const F0StatsTable& stats);
F0StatsTable f0_stats_from_json(const std::string& text, const DomainSet& domains);
void write_f0_stats(const std::filesystem::path& path, const F0StatsTable& stats);
F0StatsTable read_f0_stats(const std::filesystem::path& path, const DomainSet& domains);

}  // namespace evc
