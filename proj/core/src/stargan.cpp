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

#include "evc/stargan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "evc/error.hpp"
#include "io_util.hpp"

namespace evc {
namespace {

using nn::LayerKind;
using nn::LayerSpec;
using nn::Shape;
using nn::Tensor;

LayerSpec layer(LayerKind kind, int out, int kh, int kw, int sh, int sw, int ph, int pw,
                bool conditioned = false) {
  return {kind, out, kh, kw, sh, sw, ph, pw, conditioned};
}

constexpr auto kConv = LayerKind::kConv;
constexpr auto kGated = LayerKind::kGatedConv;
constexpr auto kDeconv = LayerKind::kDeconv;
constexpr auto kGatedDeconv = LayerKind::kGatedDeconv;

double clamp_prob(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

double neg_log(double p) { return -std::log(clamp_prob(p)); }

// d/dp of -log(clamp(p)); zero where the clamp is active.
double neg_log_grad(double p) {
  if (p < kProbabilityFloor || p > 1.0 - kProbabilityFloor) return 0.0;
  return -1.0 / p;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

nn::Network build(const std::vector<LayerSpec>& layers, const ArchConfig& arch, int code) {
  const int in = arch.layout == InputLayout::kImage ? 1 : arch.q;
  return nn::Network(layers, in, code);
}

Tensor to_tensor(const ArchConfig& arch, const McSegment& seg) {
  const auto& v = seg.values();
  return Tensor(arch.input_shape(seg.n()), std::vector<double>(v.data(), v.data() + v.size()));
}

RowMatrix tensor_values(const Tensor& t, int q, int n) {
  RowMatrix out(q, n);
  std::copy(t.data.begin(), t.data.end(), out.data());
  return out;
}

void check_segment(const ModelBundle& model, const McSegment& seg) {
  if (seg.q() != model.q()) {
    throw Error(ErrorCode::kShape, "segment has " + std::to_string(seg.q()) +
                                       " coefficients, model expects " + std::to_string(model.q()));
  }
  if (seg.n() < 1) throw Error(ErrorCode::kShape, "segment has no frames");
}

void check_code(const ModelBundle& model, const DomainCode& c) {
  if (c.size() != static_cast<std::size_t>(model.k())) {
    throw Error(ErrorCode::kShape, "domain code length differs from the model's domain count");
  }
}

// Smallest width >= n for which the network produces a non-empty map.
int fit_width(const nn::Network& net, const ArchConfig& arch, int n) {
  for (int w = n; w < n + 4096; ++w) {
    try {
      net.output_shape(arch.input_shape(w));
      return w;
    } catch (const Error&) {
    }
  }
  throw Error(ErrorCode::kShape, "no admissible input width");
}

Tensor padded_tensor(const ArchConfig& arch, const McSegment& seg, int width) {
  Tensor t(arch.input_shape(width));
  const auto& v = seg.values();
  for (int r = 0; r < seg.q(); ++r) {
    std::copy(v.row(r).data(), v.row(r).data() + seg.n(), t.data.data() + r * width);
  }
  return t;
}

double map_mean(const Tensor& t, int channel) {
  const std::size_t plane = t.shape.plane();
  double acc = 0.0;
  for (std::size_t i = 0; i < plane; ++i) acc += t.data[channel * plane + i];
  return acc / static_cast<double>(plane);
}

// Fills every cell of `channel` with value/plane: the adjoint of map_mean.
void spread(Tensor& grad, int channel, double value) {
  const std::size_t plane = grad.shape.plane();
  const double v = value / static_cast<double>(plane);
  std::fill_n(grad.data.begin() + channel * plane, plane, v);
}

struct ForwardD {
  Tensor map;
  nn::Trace trace;
  double prob = 0.0;
};

ForwardD run_discriminator(const ModelBundle& m, const Tensor& y, const DomainCode& c,
                           bool keep_trace) {
  ForwardD out;
  auto code = c.onehot();
  out.map = m.discriminator().forward(m.disc_params, y, code, keep_trace ? &out.trace : nullptr);
  out.prob = sigmoid(map_mean(out.map, 0));
  return out;
}

struct ForwardC {
  Tensor map;
  nn::Trace trace;
  std::vector<double> probs;
};

ForwardC run_classifier(const ModelBundle& m, const Tensor& y, bool keep_trace) {
  ForwardC out;
  out.map = m.classifier().forward(m.cls_params, y, {}, keep_trace ? &out.trace : nullptr);
  std::vector<double> logits(static_cast<std::size_t>(out.map.shape.c));
  for (int k = 0; k < out.map.shape.c; ++k) logits[k] = map_mean(out.map, k);
  out.probs = softmax(logits);
  return out;
}

Tensor run_generator(const ModelBundle& m, const Tensor& x, const DomainCode& c, nn::Trace* trace) {
  auto code = c.onehot();
  return m.generator().forward(m.gen_params, x, code, trace);
}

// Residual G(...) - x as a tensor, its norm, and d norm / d residual.
struct NormTerm {
  double value = 0.0;
  Tensor grad;
};

NormTerm norm_term(const Tensor& out, const Tensor& x, double rho, bool with_grad) {
  NormTerm t;
  double acc = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    acc += std::pow(std::abs(out.data[i] - x.data[i]), rho);
  }
  t.value = std::pow(acc, 1.0 / rho);
  if (with_grad) {
    t.grad = Tensor(out.shape);
    if (t.value > 0.0) {
      const double scale = std::pow(t.value, 1.0 - rho);
      for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double r = out.data[i] - x.data[i];
        const double s = (r > 0) - (r < 0);
        t.grad.data[i] = s * std::pow(std::abs(r), rho - 1.0) * scale;
      }
    }
  }
  return t;
}

void scale_into(Tensor& acc, const Tensor& add, double scale) {
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += scale * add.data[i];
}

void require_batch(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty batch");
}

void check_rho(double rho) {
  if (!(rho > 0.0)) throw Error(ErrorCode::kInvalidArgument, "rho must be positive");
}

const char* layout_name(InputLayout l) { return l == InputLayout::kImage ? "image" : "channels"; }

}  // namespace

McSegment::McSegment(RowMatrix values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw Error(ErrorCode::kInvalidArgument, "segment has non-finite entries");
}

McSegment McSegment::from_frames(const RowMatrix& frames_by_coeffs) {
  return McSegment(frames_by_coeffs.transpose());
}

ArchConfig ArchConfig::reference(int q, int k) {
  ArchConfig a;
  a.name = "stargan-vc";
  a.layout = InputLayout::kImage;
  a.q = q;
  a.k = k;
  a.generator = {
      layer(kGated, 32, 3, 9, 1, 1, 1, 4),
      layer(kGated, 64, 4, 8, 2, 2, 1, 3),
      layer(kGated, 128, 4, 8, 2, 2, 1, 3),
      layer(kGated, 64, 3, 5, 1, 1, 1, 2),
      layer(kGated, 5, 9, 5, 9, 1, 0, 2),
      layer(kGatedDeconv, 64, 9, 5, 9, 1, 0, 2, true),
      layer(kGatedDeconv, 128, 3, 5, 1, 1, 1, 2, true),
      layer(kGatedDeconv, 64, 4, 8, 2, 2, 1, 3, true),
      layer(kGatedDeconv, 32, 4, 8, 2, 2, 1, 3, true),
      layer(kDeconv, 1, 3, 9, 1, 1, 1, 4, true),
  };
  a.discriminator = {
      layer(kGated, 32, 3, 9, 1, 1, 1, 4, true),
      layer(kGated, 32, 3, 8, 1, 2, 1, 3, true),
      layer(kGated, 32, 3, 8, 1, 2, 1, 3, true),
      layer(kGated, 32, 3, 6, 1, 2, 1, 2, true),
      layer(kConv, 1, q, 5, q, 1, 0, 2, true),
  };
  a.classifier = {
      layer(kGated, 8, 4, 4, 2, 2, 1, 1),
      layer(kGated, 16, 4, 4, 2, 2, 1, 1),
      layer(kGated, 32, 4, 4, 2, 2, 1, 1),
      layer(kGated, 16, 3, 4, 1, 2, 1, 1),
      layer(kConv, k, 1, 4, 1, 2, 0, 1),
  };
  return a;
}

ArchConfig ArchConfig::compact(int q, int k) {
  ArchConfig a;
  a.name = "compact-1d";
  a.layout = InputLayout::kChannels;
  a.q = q;
  a.k = k;
  a.generator = {
      layer(kGated, 128, 1, 3, 1, 1, 0, 1, true),
      layer(kConv, q, 1, 3, 1, 1, 0, 1, true),
  };
  a.discriminator = {
      layer(kGated, 32, 1, 5, 1, 2, 0, 2, true),
      layer(kGated, 32, 1, 5, 1, 2, 0, 2, true),
      layer(kConv, 1, 1, 3, 1, 1, 0, 1, true),
  };
  a.classifier = {
      layer(kGated, 32, 1, 5, 1, 2, 0, 2),
      layer(kGated, 32, 1, 5, 1, 2, 0, 2),
      layer(kConv, k, 1, 3, 1, 1, 0, 1),
  };
  return a;
}

ArchConfig ArchConfig::miniature() {
  ArchConfig a;
  a.name = "miniature";
  a.layout = InputLayout::kImage;
  a.q = 4;
  a.k = 2;
  a.generator = {
      layer(kGated, 2, 3, 3, 1, 1, 1, 1),
      layer(kGated, 2, 2, 2, 2, 2, 0, 0),
      layer(kGatedDeconv, 2, 2, 2, 2, 2, 0, 0, true),
      layer(kConv, 1, 3, 3, 1, 1, 1, 1, true),
  };
  a.discriminator = {
      layer(kGated, 2, 3, 3, 1, 2, 1, 1, true),
      layer(kConv, 1, 2, 2, 2, 2, 0, 0),
  };
  a.classifier = {
      layer(kGated, 2, 3, 3, 2, 2, 1, 1),
      layer(kConv, 2, 1, 1, 1, 1, 0, 0),
  };
  return a;
}

nn::Shape ArchConfig::input_shape(int frames) const {
  return layout == InputLayout::kImage ? Shape{1, q, frames} : Shape{q, 1, frames};
}

int ArchConfig::time_multiple() const {
  int m = 1;
  for (const auto& l : generator) {
    if (l.kind == kConv || l.kind == kGated) m *= l.stride_w;
  }
  return m;
}

void ArchConfig::validate() const {
  if (q < 1 || k < 1) throw Error(ErrorCode::kConfig, "architecture needs q >= 1 and k >= 1");
  auto g = build(generator, *this, k);
  auto d = build(discriminator, *this, k);
  auto c = build(classifier, *this, 0);
  const int tm = time_multiple();
  for (int mult : {2, 3}) {
    const Shape in = input_shape(tm * std::max(mult, 8 / tm + 1));
    if (g.output_shape(in) != in) {
      throw Error(ErrorCode::kShape, "generator of '" + name + "' does not preserve shape " +
                                         nn::to_string(in));
    }
  }
  const Shape probe = input_shape(std::max(128, tm));
  if (d.output_shape(probe).c != 1) {
    throw Error(ErrorCode::kShape, "discriminator must end in one map");
  }
  if (c.output_shape(probe).c != k) {
    throw Error(ErrorCode::kShape, "classifier must end in K maps");
  }
}

std::string ArchConfig::fingerprint() const {
  nlohmann::json j = *this;
  const std::string text = j.dump();
  const auto crc = detail::crc32(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = {{"name", a.name},
       {"layout", layout_name(a.layout)},
       {"q", a.q},
       {"k", a.k},
       {"generator", a.generator},
       {"discriminator", a.discriminator},
       {"classifier", a.classifier}};
}

ArchConfig ArchConfig::preset(const std::string& preset, int q, int k) {
  if (preset == "stargan-vc" || preset == "reference") return reference(q, k);
  if (preset == "compact-1d" || preset == "compact") return compact(q, k);
  if (preset == "miniature") return miniature();
  throw Error(ErrorCode::kConfig, "unknown architecture preset '" + preset + "'");
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
  if (j.is_string()) {
    a = ArchConfig::preset(j.get<std::string>(), a.q, a.k);
    return;
  }
  if (j.contains("preset")) {
    a = ArchConfig::preset(j.at("preset").get<std::string>(), j.value("q", a.q), j.value("k", a.k));
    return;
  }
  a.name = j.value("name", std::string("custom"));
  const auto layout = j.value("layout", std::string("image"));
  if (layout == "image") {
    a.layout = InputLayout::kImage;
  } else if (layout == "channels") {
    a.layout = InputLayout::kChannels;
  } else {
    throw Error(ErrorCode::kConfig, "unknown input layout '" + layout + "'");
  }
  a.q = j.at("q").get<int>();
  a.k = j.at("k").get<int>();
  a.generator = j.at("generator").get<std::vector<LayerSpec>>();
  a.discriminator = j.at("discriminator").get<std::vector<LayerSpec>>();
  a.classifier = j.at("classifier").get<std::vector<LayerSpec>>();
}

FeatureNorm FeatureNorm::identity(int q) {
  return {std::vector<double>(q, 0.0), std::vector<double>(q, 1.0)};
}

FeatureNorm FeatureNorm::fit(std::span<const McSegment> segments) {
  if (segments.empty()) throw Error(ErrorCode::kInsufficientData, "no segments to fit normalization");
  const int q = segments.front().q();
  std::vector<double> sum(q, 0.0), sq(q, 0.0);
  double count = 0.0;
  for (const auto& s : segments) {
    if (s.q() != q) throw Error(ErrorCode::kShape, "segments differ in dimension");
    for (int i = 0; i < q; ++i) {
      const auto row = s.values().row(i);
      sum[i] += row.sum();
    }
    count += s.n();
  }
  FeatureNorm norm;
  norm.mean.resize(q);
  norm.stddev.resize(q);
  for (int i = 0; i < q; ++i) norm.mean[i] = sum[i] / count;
  for (const auto& s : segments) {
    for (int i = 0; i < q; ++i) {
      for (int n = 0; n < s.n(); ++n) {
        const double d = s.values()(i, n) - norm.mean[i];
        sq[i] += d * d;
      }
    }
  }
  for (int i = 0; i < q; ++i) {
    const double sd = std::sqrt(sq[i] / count);
    norm.stddev[i] = sd > 1e-8 ? sd : 1.0;
  }
  return norm;
}

McSegment FeatureNorm::standardize(const McSegment& raw) const {
  if (static_cast<std::size_t>(raw.q()) != mean.size()) {
    throw Error(ErrorCode::kShape, "normalization dimension mismatch");
  }
  RowMatrix v = raw.values();
  for (int i = 0; i < raw.q(); ++i) v.row(i) = (v.row(i).array() - mean[i]) / stddev[i];
  return McSegment(std::move(v));
}

McSegment FeatureNorm::destandardize(const McSegment& z) const {
  if (static_cast<std::size_t>(z.q()) != mean.size()) {
    throw Error(ErrorCode::kShape, "normalization dimension mismatch");
  }
  RowMatrix v = z.values();
  for (int i = 0; i < z.q(); ++i) v.row(i) = v.row(i).array() * stddev[i] + mean[i];
  return McSegment(std::move(v));
}

void LossWeights::validate() const {
  if (lambda_cls < 0 || lambda_cyc < 0 || lambda_id < 0) {
    throw Error(ErrorCode::kConfig, "loss weights must be non-negative");
  }
}

ModelBundle::ModelBundle(ArchConfig arch, DomainSet domains, FeatureNorm norm)
    : arch_(std::move(arch)), domains_(std::move(domains)), norm_(std::move(norm)) {
  arch_.validate();
  if (domains_.size() != static_cast<std::size_t>(arch_.k)) {
    throw Error(ErrorCode::kConfigMismatch, "domain set size differs from architecture K");
  }
  if (norm_.mean.size() != static_cast<std::size_t>(arch_.q) || norm_.stddev.size() != norm_.mean.size()) {
    throw Error(ErrorCode::kConfigMismatch, "feature normalization dimension differs from Q");
  }
  generator_ = build(arch_.generator, arch_, arch_.k);
  discriminator_ = build(arch_.discriminator, arch_, arch_.k);
  classifier_ = build(arch_.classifier, arch_, 0);
  gen_params.assign(generator_.num_params(), 0.0);
  disc_params.assign(discriminator_.num_params(), 0.0);
  cls_params.assign(classifier_.num_params(), 0.0);
}

void ModelBundle::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  generator_.init_params(gen_params, rng);
  discriminator_.init_params(disc_params, rng);
  classifier_.init_params(cls_params, rng);
}

McSegment generate(const ModelBundle& model, const McSegment& x, const DomainCode& c) {
  check_segment(model, x);
  check_code(model, c);
  const int tm = model.arch().time_multiple();
  int width = (x.n() + tm - 1) / tm * tm;
  width = fit_width(model.generator(), model.arch(), width);
  while (width % tm != 0) width = fit_width(model.generator(), model.arch(), width + 1);
  Tensor in = padded_tensor(model.arch(), x, width);
  Tensor out = run_generator(model, in, c, nullptr);
  if (out.shape != in.shape) {
    throw Error(ErrorCode::kShape, "generator changed the segment shape");
  }
  RowMatrix full = tensor_values(out, model.q(), width);
  return McSegment(full.leftCols(x.n()));
}

double discriminator_logit(const ModelBundle& model, const McSegment& y, const DomainCode& c) {
  check_segment(model, y);
  check_code(model, c);
  const int width = fit_width(model.discriminator(), model.arch(), y.n());
  auto code = c.onehot();
  Tensor map =
      model.discriminator().forward(model.disc_params, padded_tensor(model.arch(), y, width), code, nullptr);
  return map_mean(map, 0);
}

double discriminate(const ModelBundle& model, const McSegment& y, const DomainCode& c) {
  return sigmoid(discriminator_logit(model, y, c));
}

std::vector<double> classify(const ModelBundle& model, const McSegment& y) {
  check_segment(model, y);
  const int width = fit_width(model.classifier(), model.arch(), y.n());
  return run_classifier(model, padded_tensor(model.arch(), y, width), false).probs;
}

double adversarial_d_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  require_batch(d_real.size());
  require_batch(d_fake.size());
  double real = 0.0, fake = 0.0;
  for (double p : d_real) real += neg_log(p);
  for (double p : d_fake) fake += neg_log(1.0 - p);
  return real / d_real.size() + fake / d_fake.size();
}

double adversarial_g_loss(std::span<const double> d_fake) {
  require_batch(d_fake.size());
  double acc = 0.0;
  for (double p : d_fake) acc += neg_log(p);
  return acc / d_fake.size();
}

double classification_loss(std::span<const double> p_true_domain) {
  require_batch(p_true_domain.size());
  double acc = 0.0;
  for (double p : p_true_domain) acc += neg_log(p);
  return acc / p_true_domain.size();
}

double lp_norm(const RowMatrix& residual, double rho) {
  check_rho(rho);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < residual.size(); ++i) acc += std::pow(std::abs(residual.data()[i]), rho);
  return std::pow(acc, 1.0 / rho);
}

double combine_generator_objective(const GeneratorTerms& t, const LossWeights& w) {
  w.validate();
  return t.adv + w.lambda_cls * t.cls + w.lambda_cyc * t.cyc + w.lambda_id * t.id;
}

double loss_adv_d(const ModelBundle& model, std::span<const LabeledSegment> reals,
                  std::span<const LabeledSegment> fakes) {
  std::vector<double> pr, pf;
  for (const auto& r : reals) pr.push_back(discriminate(model, r.x, r.c));
  for (const auto& f : fakes) pf.push_back(discriminate(model, generate(model, f.x, f.c), f.c));
  return adversarial_d_loss(pr, pf);
}

double loss_adv_g(const ModelBundle& model, std::span<const LabeledSegment> fakes) {
  std::vector<double> pf;
  for (const auto& f : fakes) pf.push_back(discriminate(model, generate(model, f.x, f.c), f.c));
  return adversarial_g_loss(pf);
}

double loss_cls_c(const ModelBundle& model, std::span<const LabeledSegment> reals) {
  std::vector<double> p;
  for (const auto& r : reals) {
    check_code(model, r.c);
    p.push_back(classify(model, r.x)[r.c.index()]);
  }
  return classification_loss(p);
}

double loss_cls_g(const ModelBundle& model, std::span<const LabeledSegment> fakes) {
  std::vector<double> p;
  for (const auto& f : fakes) p.push_back(classify(model, generate(model, f.x, f.c))[f.c.index()]);
  return classification_loss(p);
}

double loss_cyc(const ModelBundle& model, std::span<const CycleSample> batch, double rho) {
  require_batch(batch.size());
  double acc = 0.0;
  for (const auto& s : batch) {
    const McSegment back = generate(model, generate(model, s.x, s.target), s.source);
    acc += lp_norm(back.values() - s.x.values(), rho);
  }
  return acc / batch.size();
}

double loss_id(const ModelBundle& model, std::span<const LabeledSegment> batch, double rho) {
  require_batch(batch.size());
  double acc = 0.0;
  for (const auto& s : batch) acc += lp_norm(generate(model, s.x, s.c).values() - s.x.values(), rho);
  return acc / batch.size();
}

GeneratorObjective objective_g(const ModelBundle& model, std::span<const TrainingSample> batch,
                               const LossWeights& weights, double rho, bool with_grad) {
  require_batch(batch.size());
  check_rho(rho);
  weights.validate();
  GeneratorObjective out;
  if (with_grad) out.grad.assign(model.gen_params.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const std::span<double> no_params;

  for (const auto& s : batch) {
    check_segment(model, s.x);
    check_code(model, s.source);
    check_code(model, s.target);
    const Tensor x = to_tensor(model.arch(), s.x);

    nn::Trace g_fake, g_cyc, g_id;
    const Tensor fake = run_generator(model, x, s.target, with_grad ? &g_fake : nullptr);
    if (fake.shape != x.shape) throw Error(ErrorCode::kShape, "generator changed the segment shape");

    ForwardD d = run_discriminator(model, fake, s.target, with_grad);
    out.terms.adv += inv_b * neg_log(d.prob);

    ForwardC c = run_classifier(model, fake, with_grad);
    const std::size_t tgt = s.target.index();
    out.terms.cls += inv_b * neg_log(c.probs[tgt]);

    const Tensor back = run_generator(model, fake, s.source, with_grad ? &g_cyc : nullptr);
    NormTerm cyc = norm_term(back, x, rho, with_grad);
    out.terms.cyc += inv_b * cyc.value;

    const Tensor same = run_generator(model, x, s.source, with_grad ? &g_id : nullptr);
    NormTerm idt = norm_term(same, x, rho, with_grad);
    out.terms.id += inv_b * idt.value;

    if (!with_grad) continue;

    Tensor d_fake(fake.shape);
    {
      // -log D(G(x,c), c) through the sigmoid of the mean logit.
      const double dz = inv_b * neg_log_grad(d.prob) * d.prob * (1.0 - d.prob);
      Tensor dmap(d.map.shape);
      spread(dmap, 0, dz);
      scale_into(d_fake, model.discriminator().backward(model.disc_params, d.trace, dmap, no_params, true), 1.0);
    }
    if (weights.lambda_cls > 0.0) {
      const double dp = weights.lambda_cls * inv_b * neg_log_grad(c.probs[tgt]);
      Tensor cmap(c.map.shape);
      for (int j = 0; j < c.map.shape.c; ++j) {
        const double delta = (static_cast<std::size_t>(j) == tgt) ? 1.0 : 0.0;
        spread(cmap, j, dp * c.probs[tgt] * (delta - c.probs[j]));
      }
      scale_into(d_fake, model.classifier().backward(model.cls_params, c.trace, cmap, no_params, true), 1.0);
    }
    if (weights.lambda_cyc > 0.0) {
      Tensor g = cyc.grad;
      for (double& v : g.data) v *= weights.lambda_cyc * inv_b;
      scale_into(d_fake, model.generator().backward(model.gen_params, g_cyc, g, out.grad, true), 1.0);
    }
    model.generator().backward(model.gen_params, g_fake, d_fake, out.grad, false);
    if (weights.lambda_id > 0.0) {
      Tensor g = idt.grad;
      for (double& v : g.data) v *= weights.lambda_id * inv_b;
      model.generator().backward(model.gen_params, g_id, g, out.grad, false);
    }
  }
  out.total = combine_generator_objective(out.terms, weights);
  return out;
}

ScalarObjective objective_d(const ModelBundle& model, std::span<const TrainingSample> batch,
                            bool with_grad) {
  require_batch(batch.size());
  ScalarObjective out;
  if (with_grad) out.grad.assign(model.disc_params.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    check_segment(model, s.x);
    check_code(model, s.source);
    check_code(model, s.target);
    const Tensor x = to_tensor(model.arch(), s.x);

    ForwardD real = run_discriminator(model, x, s.source, with_grad);
    out.value += inv_b * neg_log(real.prob);

    const Tensor fake_x = run_generator(model, x, s.target, nullptr);
    ForwardD fake = run_discriminator(model, fake_x, s.target, with_grad);
    out.value += inv_b * neg_log(1.0 - fake.prob);

    if (!with_grad) continue;
    {
      const double dz = inv_b * neg_log_grad(real.prob) * real.prob * (1.0 - real.prob);
      Tensor dmap(real.map.shape);
      spread(dmap, 0, dz);
      model.discriminator().backward(model.disc_params, real.trace, dmap, out.grad, false);
    }
    {
      // d/dz of -log(1 - sigmoid(z)) = -(1/(1-p)) * (-p(1-p)).
      const double q = 1.0 - fake.prob;
      const double dz = inv_b * neg_log_grad(q) * (-fake.prob * (1.0 - fake.prob));
      Tensor dmap(fake.map.shape);
      spread(dmap, 0, dz);
      model.discriminator().backward(model.disc_params, fake.trace, dmap, out.grad, false);
    }
  }
  return out;
}

ScalarObjective objective_c(const ModelBundle& model, std::span<const TrainingSample> batch,
                            bool with_grad) {
  require_batch(batch.size());
  ScalarObjective out;
  if (with_grad) out.grad.assign(model.cls_params.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    check_segment(model, s.x);
    check_code(model, s.source);
    ForwardC c = run_classifier(model, to_tensor(model.arch(), s.x), with_grad);
    const std::size_t src = s.source.index();
    out.value += inv_b * neg_log(c.probs[src]);
    if (!with_grad) continue;
    const double dp = inv_b * neg_log_grad(c.probs[src]);
    Tensor cmap(c.map.shape);
    for (int j = 0; j < c.map.shape.c; ++j) {
      const double delta = (static_cast<std::size_t>(j) == src) ? 1.0 : 0.0;
      spread(cmap, j, dp * c.probs[src] * (delta - c.probs[j]));
    }
    model.classifier().backward(model.cls_params, c.trace, cmap, out.grad, false);
  }
  return out;
}

}  // namespace evc
