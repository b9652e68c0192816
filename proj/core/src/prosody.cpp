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

#include "evc/prosody.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "evc/error.hpp"
#include "io_util.hpp"

namespace evc {

DomainF0Stats estimate_f0_stats(std::span<const std::vector<double>> f0_streams,
                                const EmotionDomain& domain) {
  // Two passes over the voiced log-F0 values; the mean is exact before
  // the squared deviations are accumulated.
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& stream : f0_streams) {
    for (double f : stream) {
      if (f > 0.0) {
        sum += std::log(f);
        ++count;
      }
    }
  }
  if (count < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "domain '" + domain.label + "' has " + std::to_string(count) +
                    " voiced frames, need at least 2");
  }
  const double mu = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& stream : f0_streams) {
    for (double f : stream) {
      if (f > 0.0) {
        const double d = std::log(f) - mu;
        ss += d * d;
      }
    }
  }
  const double sigma = std::sqrt(ss / static_cast<double>(count));
  if (!(sigma > 0.0)) {
    throw Error(ErrorCode::kInsufficientVariance,
                "domain '" + domain.label + "' has constant voiced F0");
  }
  return {domain, mu, sigma, count};
}

DomainF0Stats estimate_f0_stats(std::span<const FeatureSequence> features, const EmotionDomain& domain) {
  std::vector<std::vector<double>> streams;
  streams.reserve(features.size());
  for (const auto& f : features) streams.push_back(f.f0);
  return estimate_f0_stats(std::span<const std::vector<double>>(streams), domain);
}

std::vector<double> convert_f0(std::span<const double> f0, const DomainF0Stats& source,
                               const DomainF0Stats& target) {
  if (!(source.sigma > 0.0)) {
    throw Error(ErrorCode::kStats, "source F0 sigma must be positive");
  }
  std::vector<double> out(f0.begin(), f0.end());
  const bool identity = source.mu == target.mu && source.sigma == target.sigma;
  if (identity) return out;
  const double scale = target.sigma / source.sigma;
  for (double& f : out) {
    if (f > 0.0) f = std::exp(scale * (std::log(f) - source.mu) + target.mu);
  }
  return out;
}

RowMatrix convert_aperiodicity(const RowMatrix& aperiodicity) { return aperiodicity; }

std::string f0_stats_to_json(const F0StatsTable& stats) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [label, s] : stats) {
    rows.push_back({{"domain", s.domain.label}, {"mu", s.mu}, {"sigma", s.sigma},
                    {"n_frames", s.n_frames}});
  }
  return rows.dump(2) + "\n";
}

F0StatsTable f0_stats_from_json(const std::string& text, const DomainSet& domains) {
  F0StatsTable out;
  try {
    for (const auto& row : nlohmann::json::parse(text)) {
      DomainF0Stats s;
      s.domain = domains.find(row.at("domain").get<std::string>());
      s.mu = row.at("mu").get<double>();
      s.sigma = row.at("sigma").get<double>();
      s.n_frames = row.at("n_frames").get<std::size_t>();
      if (!(s.sigma > 0.0) || s.n_frames < 2) {
        throw Error(ErrorCode::kStats, "invalid statistics for domain " + s.domain.label);
      }
      out[s.domain.label] = s;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kDecode, std::string("F0 statistics: ") + e.what());
  }
  return out;
}

void write_f0_stats(const std::filesystem::path& path, const F0StatsTable& stats) {
  detail::write_file_atomic(path, f0_stats_to_json(stats));
}

F0StatsTable read_f0_stats(const std::filesystem::path& path, const DomainSet& domains) {
  return f0_stats_from_json(detail::read_text_file(path), domains);
}

}  // namespace evc
