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

#include "evc/nn.hpp"

#include <cmath>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "evc/error.hpp"

namespace evc::nn {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;

bool is_gated(LayerKind k) { return k == LayerKind::kGatedConv || k == LayerKind::kGatedDeconv; }
bool is_deconv(LayerKind k) { return k == LayerKind::kDeconv || k == LayerKind::kGatedDeconv; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Geometry {
  int kh, kw, sh, sw, ph, pw;
};

Geometry geometry(const LayerSpec& s) {
  return {s.kernel_h, s.kernel_w, s.stride_h, s.stride_w, s.pad_h, s.pad_w};
}

// `image` is (channels, h, w); `columns` is (channels*kh*kw) x (oh*ow).
void im2col(const double* image, int channels, int h, int w, const Geometry& g, int oh, int ow,
            double* columns) {
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        double* row = columns + (static_cast<std::size_t>(c * g.kh + i) * g.kw + j) * plane;
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * g.sh - g.ph + i;
          double* dst = row + static_cast<std::size_t>(oy) * ow;
          if (y < 0 || y >= h) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* src = image + (static_cast<std::size_t>(c) * h + y) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int x = ox * g.sw - g.pw + j;
            dst[ox] = (x >= 0 && x < w) ? src[x] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back onto a zero-initialised image.
void col2im(const double* columns, int channels, int h, int w, const Geometry& g, int oh, int ow,
            double* image) {
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const double* row = columns + (static_cast<std::size_t>(c * g.kh + i) * g.kw + j) * plane;
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * g.sh - g.ph + i;
          if (y < 0 || y >= h) continue;
          double* dst = image + (static_cast<std::size_t>(c) * h + y) * w;
          const double* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int x = ox * g.sw - g.pw + j;
            if (x >= 0 && x < w) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

Shape layer_output(const LayerSpec& s, Shape in) {
  Shape out;
  out.c = s.out_channels;
  if (is_deconv(s.kind)) {
    out.h = (in.h - 1) * s.stride_h - 2 * s.pad_h + s.kernel_h;
    out.w = (in.w - 1) * s.stride_w - 2 * s.pad_w + s.kernel_w;
  } else {
    const int nh = in.h + 2 * s.pad_h - s.kernel_h;
    const int nw = in.w + 2 * s.pad_w - s.kernel_w;
    out.h = nh < 0 ? 0 : nh / s.stride_h + 1;
    out.w = nw < 0 ? 0 : nw / s.stride_w + 1;
  }
  return out;
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kGatedConv: return "gated_conv";
    case LayerKind::kDeconv: return "deconv";
    case LayerKind::kGatedDeconv: return "gated_deconv";
  }
  return "conv";
}

}  // namespace

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.c) + ", " + std::to_string(s.h) + ", " + std::to_string(s.w) + ")";
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
  if (data.size() != shape.size()) {
    throw Error(ErrorCode::kShape, "tensor data does not match shape " + to_string(shape));
  }
}

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = {{"kind", kind_name(s.kind)},
       {"out_channels", s.out_channels},
       {"kernel", {s.kernel_h, s.kernel_w}},
       {"stride", {s.stride_h, s.stride_w}},
       {"padding", {s.pad_h, s.pad_w}},
       {"conditioned", s.conditioned}};
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "conv") {
    s.kind = LayerKind::kConv;
  } else if (kind == "gated_conv") {
    s.kind = LayerKind::kGatedConv;
  } else if (kind == "deconv") {
    s.kind = LayerKind::kDeconv;
  } else if (kind == "gated_deconv") {
    s.kind = LayerKind::kGatedDeconv;
  } else {
    throw Error(ErrorCode::kConfig, "unknown layer kind '" + kind + "'");
  }
  s.out_channels = j.at("out_channels").get<int>();
  s.kernel_h = j.at("kernel").at(0).get<int>();
  s.kernel_w = j.at("kernel").at(1).get<int>();
  s.stride_h = j.at("stride").at(0).get<int>();
  s.stride_w = j.at("stride").at(1).get<int>();
  s.pad_h = j.at("padding").at(0).get<int>();
  s.pad_w = j.at("padding").at(1).get<int>();
  s.conditioned = j.value("conditioned", false);
}

Network::Network(std::vector<LayerSpec> layers, int input_channels, int code_channels)
    : layers_(std::move(layers)), input_channels_(input_channels), code_channels_(code_channels) {
  if (layers_.empty()) throw Error(ErrorCode::kConfig, "network needs at least one layer");
  int channels = input_channels_;
  std::size_t offset = 0;
  for (const auto& s : layers_) {
    if (s.out_channels < 1 || s.kernel_h < 1 || s.kernel_w < 1 || s.stride_h < 1 ||
        s.stride_w < 1 || s.pad_h < 0 || s.pad_w < 0) {
      throw Error(ErrorCode::kConfig, "invalid layer geometry");
    }
    if (s.conditioned && code_channels_ == 0) {
      throw Error(ErrorCode::kConfig, "conditioned layer in a network without a domain code");
    }
    LayerOffsets o;
    o.in_channels = channels + (s.conditioned ? code_channels_ : 0);
    o.maps = is_gated(s.kind) ? 2 * s.out_channels : s.out_channels;
    o.weight = offset;
    offset += static_cast<std::size_t>(o.in_channels) * o.maps * s.kernel_h * s.kernel_w;
    o.bias = offset;
    offset += static_cast<std::size_t>(o.maps);
    offsets_.push_back(o);
    channels = s.out_channels;
  }
  num_params_ = offset;
}

Shape Network::output_shape(Shape input) const {
  if (input.c != input_channels_) {
    throw Error(ErrorCode::kShape, "network expects " + std::to_string(input_channels_) +
                                       " input channels, got " + to_string(input));
  }
  Shape s = input;
  for (const auto& layer : layers_) {
    s = layer_output(layer, s);
    if (s.h < 1 || s.w < 1) {
      throw Error(ErrorCode::kShape, "input " + to_string(input) + " collapses to an empty map");
    }
  }
  return s;
}

void Network::init_params(std::span<double> params, std::mt19937_64& rng) const {
  if (params.size() != num_params_) throw Error(ErrorCode::kShape, "parameter count mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    const auto& o = offsets_[l];
    double fan_in = static_cast<double>(o.in_channels) * s.kernel_h * s.kernel_w;
    if (is_deconv(s.kind)) fan_in /= static_cast<double>(s.stride_h) * s.stride_w;
    const double bound = 1.0 / std::sqrt(std::max(1.0, fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = o.weight; i < o.bias; ++i) params[i] = dist(rng);
    for (int i = 0; i < o.maps; ++i) params[o.bias + i] = 0.0;
  }
}

Tensor Network::forward(std::span<const double> params, const Tensor& x,
                        std::span<const double> code, Trace* trace) const {
  if (params.size() != num_params_) throw Error(ErrorCode::kShape, "parameter count mismatch");
  output_shape(x.shape);
  if (code_channels_ > 0 && code.size() != static_cast<std::size_t>(code_channels_)) {
    throw Error(ErrorCode::kShape, "domain code has wrong length");
  }
  if (trace) trace->layers.assign(layers_.size(), {});

  Tensor current = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    const auto& o = offsets_[l];
    const Geometry g = geometry(s);

    Tensor input;
    if (s.conditioned) {
      input = Tensor({o.in_channels, current.shape.h, current.shape.w});
      std::copy(current.data.begin(), current.data.end(), input.data.begin());
      const std::size_t plane = current.shape.plane();
      for (int k = 0; k < code_channels_; ++k) {
        std::fill_n(input.data.begin() + (current.shape.c + k) * plane, plane, code[k]);
      }
    } else {
      input = std::move(current);
    }
    const Shape in = input.shape;
    const Shape out_shape = layer_output(s, in);
    const Shape pre_shape{o.maps, out_shape.h, out_shape.w};
    std::vector<double> pre(pre_shape.size());
    std::vector<double> columns;

    const double* bias = params.data() + o.bias;
    if (!is_deconv(s.kind)) {
      const auto rows = static_cast<Eigen::Index>(in.c) * g.kh * g.kw;
      const auto plane = static_cast<Eigen::Index>(out_shape.plane());
      columns.resize(static_cast<std::size_t>(rows * plane));
      im2col(input.data.data(), in.c, in.h, in.w, g, out_shape.h, out_shape.w, columns.data());
      CMapM weight(params.data() + o.weight, o.maps, rows);
      CMapM cols(columns.data(), rows, plane);
      MapM result(pre.data(), o.maps, plane);
      result.noalias() = weight * cols;
    } else {
      const auto rows = static_cast<Eigen::Index>(o.maps) * g.kh * g.kw;
      const auto plane = static_cast<Eigen::Index>(in.plane());
      std::vector<double> cols_buf(static_cast<std::size_t>(rows * plane));
      CMapM weight(params.data() + o.weight, in.c, rows);
      CMapM xin(input.data.data(), in.c, plane);
      MapM cols(cols_buf.data(), rows, plane);
      cols.noalias() = weight.transpose() * xin;
      col2im(cols_buf.data(), o.maps, out_shape.h, out_shape.w, g, in.h, in.w, pre.data());
    }
    const std::size_t plane = out_shape.plane();
    for (int m = 0; m < o.maps; ++m) {
      double* p = pre.data() + m * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias[m];
    }

    Tensor out(out_shape);
    if (is_gated(s.kind)) {
      const std::size_t half = static_cast<std::size_t>(s.out_channels) * plane;
      for (std::size_t i = 0; i < half; ++i) out.data[i] = pre[i] * sigmoid(pre[half + i]);
    } else {
      out.data = pre;
    }

    if (trace) {
      auto& t = trace->layers[l];
      t.input = std::move(input);
      t.columns = std::move(columns);
      t.pre = std::move(pre);
      t.out_shape = out_shape;
    }
    current = std::move(out);
  }
  return current;
}

Tensor Network::backward(std::span<const double> params, const Trace& trace, const Tensor& grad_out,
                         std::span<double> grad_params, bool need_input_grad) const {
  if (trace.layers.size() != layers_.size()) {
    throw Error(ErrorCode::kShape, "trace does not belong to this network");
  }
  if (!grad_params.empty() && grad_params.size() != num_params_) {
    throw Error(ErrorCode::kShape, "gradient buffer size mismatch");
  }
  const bool want_params = !grad_params.empty();
  Tensor grad = grad_out;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& s = layers_[li];
    const auto& o = offsets_[li];
    const auto& t = trace.layers[li];
    const Geometry g = geometry(s);
    const Shape in = t.input.shape;
    const Shape out_shape = t.out_shape;
    if (grad.shape != out_shape) throw Error(ErrorCode::kShape, "gradient shape mismatch");
    const std::size_t plane = out_shape.plane();

    std::vector<double> dpre(static_cast<std::size_t>(o.maps) * plane);
    if (is_gated(s.kind)) {
      const std::size_t half = static_cast<std::size_t>(s.out_channels) * plane;
      for (std::size_t i = 0; i < half; ++i) {
        const double a = t.pre[i];
        const double sg = sigmoid(t.pre[half + i]);
        dpre[i] = grad.data[i] * sg;
        dpre[half + i] = grad.data[i] * a * sg * (1.0 - sg);
      }
    } else {
      dpre = grad.data;
    }

    if (want_params) {
      double* gb = grad_params.data() + o.bias;
      for (int m = 0; m < o.maps; ++m) {
        const double* p = dpre.data() + m * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        gb[m] += acc;
      }
    }

    const bool need_dx = li > 0 || need_input_grad;
    Tensor dx;
    if (!is_deconv(s.kind)) {
      const auto rows = static_cast<Eigen::Index>(in.c) * g.kh * g.kw;
      const auto p = static_cast<Eigen::Index>(plane);
      CMapM dp(dpre.data(), o.maps, p);
      CMapM cols(t.columns.data(), rows, p);
      if (want_params) {
        MapM gw(grad_params.data() + o.weight, o.maps, rows);
        gw.noalias() += dp * cols.transpose();
      }
      if (need_dx) {
        CMapM weight(params.data() + o.weight, o.maps, rows);
        std::vector<double> dcols(static_cast<std::size_t>(rows * p));
        MapM dc(dcols.data(), rows, p);
        dc.noalias() = weight.transpose() * dp;
        dx = Tensor(in);
        col2im(dcols.data(), in.c, in.h, in.w, g, out_shape.h, out_shape.w, dx.data.data());
      }
    } else {
      const auto rows = static_cast<Eigen::Index>(o.maps) * g.kh * g.kw;
      const auto p = static_cast<Eigen::Index>(in.plane());
      std::vector<double> dcols(static_cast<std::size_t>(rows * p));
      im2col(dpre.data(), o.maps, out_shape.h, out_shape.w, g, in.h, in.w, dcols.data());
      CMapM dc(dcols.data(), rows, p);
      if (want_params) {
        CMapM xin(t.input.data.data(), in.c, p);
        MapM gw(grad_params.data() + o.weight, in.c, rows);
        gw.noalias() += xin * dc.transpose();
      }
      if (need_dx) {
        CMapM weight(params.data() + o.weight, in.c, rows);
        dx = Tensor(in);
        MapM d(dx.data.data(), in.c, p);
        d.noalias() = weight * dc;
      }
    }
    if (!need_dx) return {};
    if (s.conditioned) {
      const int keep = in.c - code_channels_;
      dx.data.resize(static_cast<std::size_t>(keep) * in.plane());
      dx.shape.c = keep;
    }
    grad = std::move(dx);
  }
  return grad;
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const AdamConfig& config) {
  if (params.size() != grads.size()) throw Error(ErrorCode::kShape, "adam: size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= config.alpha * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

}  // namespace evc::nn
