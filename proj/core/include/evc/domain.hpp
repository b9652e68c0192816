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

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evc {

struct EmotionDomain {
  std::string label;
  std::size_t index = 0;

  friend bool operator==(const EmotionDomain&, const EmotionDomain&) = default;
};

// Closed, ordered label set. Indices are the positions in the list, so they
// always form 0..K-1 without gaps.
class DomainSet {
 public:
  DomainSet() = default;
  explicit DomainSet(std::vector<std::string> labels);

  // neutral, joyful, angry, sad
  static DomainSet defaults();

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool contains(std::string_view label) const;
  EmotionDomain at(std::size_t index) const;
  // Throws ErrorCode::kDomain for unknown labels.
  EmotionDomain find(std::string_view label) const;
  std::vector<EmotionDomain> domains() const;

  friend bool operator==(const DomainSet&, const DomainSet&) = default;

 private:
  std::vector<std::string> labels_;
};

// One-hot target code. Construction validates the one-hot contract so that a
// malformed code can never reach a network.
class DomainCode {
 public:
  DomainCode(std::size_t index, std::size_t num_domains);
  // Throws kInvalidArgument unless entries are in {0,1} with exactly one 1.
  static DomainCode from_vector(std::span<const double> onehot);

  std::size_t index() const { return index_; }
  std::size_t size() const { return size_; }
  std::vector<double> onehot() const;
  double operator[](std::size_t k) const { return k == index_ ? 1.0 : 0.0; }

  friend bool operator==(const DomainCode&, const DomainCode&) = default;

 private:
  std::size_t index_;
  std::size_t size_;
};

}  // namespace evc
