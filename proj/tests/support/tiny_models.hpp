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

#include <cmath>
#include <vector>

#include "evc/stargan.hpp"

namespace evc::testing {

// Channel-layout networks of single 1x1 convolutions whose parameters can be
// set by hand: G is an affine map of (x, code), D a logit per domain code and
// C a logit per domain.
inline ArchConfig tiny_arch(int q, int k) {
  ArchConfig a;
  a.name = "tiny";
  a.layout = InputLayout::kChannels;
  a.q = q;
  a.k = k;
  nn::LayerSpec g;
  g.kind = nn::LayerKind::kConv;
  g.out_channels = q;
  g.conditioned = true;
  a.generator = {g};
  nn::LayerSpec d = g;
  d.out_channels = 1;
  a.discriminator = {d};
  nn::LayerSpec c = g;
  c.out_channels = k;
  c.conditioned = false;
  a.classifier = {c};
  return a;
}

inline ModelBundle tiny_model(int q, int k) {
  std::vector<std::string> labels;
  for (int i = 0; i < k; ++i) labels.push_back("d" + std::to_string(i));
  return ModelBundle(tiny_arch(q, k), DomainSet(labels), FeatureNorm::identity(q));
}

// G(x, c) = x: weight[m][c] = (m == c) over the q + k input channels.
inline void set_identity_generator(ModelBundle& m) {
  const int q = m.q(), in = m.q() + m.k();
  std::fill(m.gen_params.begin(), m.gen_params.end(), 0.0);
  for (int o = 0; o < q; ++o) m.gen_params[static_cast<std::size_t>(o) * in + o] = 1.0;
}

// D(y, c_k) = sigmoid(logits[k]) for every y.
inline void set_discriminator_code_logits(ModelBundle& m, const std::vector<double>& logits) {
  std::fill(m.disc_params.begin(), m.disc_params.end(), 0.0);
  for (int k = 0; k < m.k(); ++k) m.disc_params[static_cast<std::size_t>(m.q() + k)] = logits[k];
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline McSegment constant_segment(int q, int n, double v) { return McSegment(RowMatrix::Constant(q, n, v)); }

}  // namespace evc::testing
