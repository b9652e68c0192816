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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "evc/domain.hpp"
#include "evc/nn.hpp"
#include "evc/vocoder.hpp"

namespace evc {

// Q x N block of mel-cepstra (coefficients down, frames across).
class McSegment {
 public:
  McSegment() = default;
  // Throws kInvalidArgument on NaN/Inf.
  explicit McSegment(RowMatrix values);
  static McSegment from_frames(const RowMatrix& frames_by_coeffs);

  const RowMatrix& values() const { return values_; }
  int q() const { return static_cast<int>(values_.rows()); }
  int n() const { return static_cast<int>(values_.cols()); }
  RowMatrix to_frames() const { return values_.transpose(); }

 private:
  RowMatrix values_;
};

// How a Q x N segment is presented to the convolutional stacks: as a
// one-channel Q x N image (2-D convolutions over quefrency and time) or as Q
// channels of a 1 x N signal (1-D convolutions over time).
enum class InputLayout { kImage, kChannels };

struct ArchConfig {
  std::string name = "custom";
  InputLayout layout = InputLayout::kImage;
  int q = 36;
  int k = 4;
  std::vector<nn::LayerSpec> generator;
  std::vector<nn::LayerSpec> discriminator;
  std::vector<nn::LayerSpec> classifier;

  // Gated 2-D CNN layout of the StarGAN-VC generator, discriminator and
  // classifier (Q must be 36 for the stride pattern to close).
  static ArchConfig reference(int q = 36, int k = 4);
  // 1-D CNNs over time with Q input channels: a single conditioned gated
  // layer for G (about 45k parameters), strided gated stacks for D and C.
  // Small enough to train on a CPU.
  static ArchConfig compact(int q = 36, int k = 4);
  // Q=4, K=2 network with a few hundred parameters for gradient checks.
  static ArchConfig miniature();
  // "reference" / "stargan-vc", "compact" / "compact-1d" or "miniature".
  static ArchConfig preset(const std::string& name, int q = 36, int k = 4);

  nn::Shape input_shape(int frames) const;
  // Inference pads the time axis up to a multiple of this.
  int time_multiple() const;
  // Throws kShape unless the generator maps (Q, N) onto itself for N a
  // multiple of time_multiple(), and D/C produce 1 and K maps respectively.
  void validate() const;
  std::string fingerprint() const;

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

void to_json(nlohmann::json& j, const ArchConfig& arch);
void from_json(const nlohmann::json& j, ArchConfig& arch);

// Per-coefficient z-score statistics of the training MCCs.
struct FeatureNorm {
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureNorm identity(int q);
  static FeatureNorm fit(std::span<const McSegment> segments);
  McSegment standardize(const McSegment& raw) const;
  McSegment destandardize(const McSegment& standardized) const;

  friend bool operator==(const FeatureNorm&, const FeatureNorm&) = default;
};

struct LossWeights {
  double lambda_cls = 1.0;
  double lambda_cyc = 1.0;
  double lambda_id = 1.0;

  void validate() const;
};

// Generator, real/fake discriminator and domain classifier with their
// parameters and the standardization they were trained with.
class ModelBundle {
 public:
  ModelBundle() = default;
  // Parameters start zeroed; call initialize() for random weights.
  ModelBundle(ArchConfig arch, DomainSet domains, FeatureNorm norm);

  void initialize(std::uint64_t seed);

  const ArchConfig& arch() const { return arch_; }
  const DomainSet& domains() const { return domains_; }
  const FeatureNorm& norm() const { return norm_; }
  int q() const { return arch_.q; }
  int k() const { return arch_.k; }

  const nn::Network& generator() const { return generator_; }
  const nn::Network& discriminator() const { return discriminator_; }
  const nn::Network& classifier() const { return classifier_; }

  std::vector<double> gen_params;
  std::vector<double> disc_params;
  std::vector<double> cls_params;

 private:
  ArchConfig arch_;
  DomainSet domains_;
  FeatureNorm norm_;
  nn::Network generator_;
  nn::Network discriminator_;
  nn::Network classifier_;
};

struct LabeledSegment {
  McSegment x;
  DomainCode c;
};

struct CycleSample {
  McSegment x;
  DomainCode source;  // c', the domain x belongs to
  DomainCode target;  // c
};

struct TrainingSample {
  McSegment x;
  DomainCode source;
  DomainCode target;
};

// Clamp applied to every log argument.
inline constexpr double kProbabilityFloor = 1e-7;

// ---- network operations; inputs are standardized segments ----

// G(x, c). Any N is accepted; the time axis is zero-padded to the
// architecture's time multiple and cropped back.
McSegment generate(const ModelBundle& model, const McSegment& x, const DomainCode& c);
// D(y, c) = sigmoid(mean of the final map).
double discriminate(const ModelBundle& model, const McSegment& y, const DomainCode& c);
double discriminator_logit(const ModelBundle& model, const McSegment& y, const DomainCode& c);
// p_C(.|y) = softmax(mean of each of the K final maps).
std::vector<double> classify(const ModelBundle& model, const McSegment& y);

// ---- loss terms on probabilities and residuals ----

double adversarial_d_loss(std::span<const double> d_real, std::span<const double> d_fake);
double adversarial_g_loss(std::span<const double> d_fake);
double classification_loss(std::span<const double> p_true_domain);
// Entrywise L_rho norm of a Q x N residual.
double lp_norm(const RowMatrix& residual, double rho);

struct GeneratorTerms {
  double adv = 0.0;
  double cls = 0.0;
  double cyc = 0.0;
  double id = 0.0;
};

double combine_generator_objective(const GeneratorTerms& terms, const LossWeights& weights);

// ---- model-level losses (batch means) ----

double loss_adv_d(const ModelBundle& model, std::span<const LabeledSegment> reals,
                  std::span<const LabeledSegment> fakes);
double loss_adv_g(const ModelBundle& model, std::span<const LabeledSegment> fakes);
double loss_cls_c(const ModelBundle& model, std::span<const LabeledSegment> reals);
double loss_cls_g(const ModelBundle& model, std::span<const LabeledSegment> fakes);
double loss_cyc(const ModelBundle& model, std::span<const CycleSample> batch, double rho);
double loss_id(const ModelBundle& model, std::span<const LabeledSegment> batch, double rho);

// ---- overall objectives with analytic gradients ----

struct GeneratorObjective {
  GeneratorTerms terms;
  double total = 0.0;
  std::vector<double> grad;  // d total / d gen_params, empty unless requested
};

struct ScalarObjective {
  double value = 0.0;
  std::vector<double> grad;
};

// I_G over a batch: fakes G(x, target) scored by D and C, cycle back to the
// source, identity through the source code.
GeneratorObjective objective_g(const ModelBundle& model, std::span<const TrainingSample> batch,
                               const LossWeights& weights, double rho, bool with_grad);
// I_D: reals are (x, source); fakes are G(x, target) under the target code.
ScalarObjective objective_d(const ModelBundle& model, std::span<const TrainingSample> batch,
                            bool with_grad);
// I_C on the real (x, source) pairs.
ScalarObjective objective_c(const ModelBundle& model, std::span<const TrainingSample> batch,
                            bool with_grad);

}  // namespace evc
