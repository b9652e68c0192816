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
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace evc::nn {

struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const { return static_cast<std::size_t>(c) * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

// Single-sample activation, channel-major: data[(c * h + y) * w + x].
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> values);
};

enum class LayerKind { kConv, kGatedConv, kDeconv, kGatedDeconv };

// A 2-D (transposed) convolution. Gated kinds compute 2*out_channels maps
// split as (A, B) and emit A * sigmoid(B). `conditioned` layers see the domain
// code broadcast over the plane as extra input channels.
struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int out_channels = 1;
  int kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
  bool conditioned = false;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

void to_json(nlohmann::json& j, const LayerSpec& spec);
void from_json(const nlohmann::json& j, LayerSpec& spec);

struct LayerTrace {
  Tensor input;                 // includes concatenated code channels
  std::vector<double> columns;  // im2col of input, conv layers only
  std::vector<double> pre;      // pre-activation maps
  Shape out_shape;
};

struct Trace {
  std::vector<LayerTrace> layers;
};

// A feed-forward stack of LayerSpecs with parameters held outside the object
// in one flat vector (weights then bias per layer), so optimizers, gradient
// checks and checkpoints all work on plain spans.
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerSpec> layers, int input_channels, int code_channels);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  int input_channels() const { return input_channels_; }
  int code_channels() const { return code_channels_; }
  std::size_t num_params() const { return num_params_; }

  // Throws ErrorCode::kShape if any layer would produce an empty map.
  Shape output_shape(Shape input) const;

  void init_params(std::span<double> params, std::mt19937_64& rng) const;

  // `code` may be empty only if no layer is conditioned. `trace` may be null
  // for inference.
  Tensor forward(std::span<const double> params, const Tensor& x, std::span<const double> code,
                 Trace* trace) const;

  // Accumulates parameter gradients into `grad_params` (skipped if empty) and
  // returns d(loss)/d(x) without the code channels (empty if !need_input_grad).
  Tensor backward(std::span<const double> params, const Trace& trace, const Tensor& grad_out,
                  std::span<double> grad_params, bool need_input_grad) const;

 private:
  struct LayerOffsets {
    std::size_t weight = 0;
    std::size_t bias = 0;
    int in_channels = 0;  // including code channels
    int maps = 0;         // out_channels, doubled when gated
  };

  std::vector<LayerSpec> layers_;
  std::vector<LayerOffsets> offsets_;
  int input_channels_ = 0;
  int code_channels_ = 0;
  std::size_t num_params_ = 0;
};

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;
};

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const AdamConfig& config);

}  // namespace evc::nn
