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
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "evc/checkpoint.hpp"
#include "evc/corpus.hpp"
#include "evc/nn.hpp"
#include "evc/stargan.hpp"

namespace evc {

struct AdamSettings {
  double alpha = 1e-3;
  double beta1 = 0.9;

  nn::AdamConfig config() const { return {alpha, beta1}; }
  friend bool operator==(const AdamSettings&, const AdamSettings&) = default;
};

void to_json(nlohmann::json& j, const AdamSettings& a);
void from_json(const nlohmann::json& j, AdamSettings& a);

struct TrainConfig {
  ArchConfig arch = ArchConfig::reference();
  int batch_size = 2;
  int epochs = 2000;
  AdamSettings adam_g{1e-3, 0.9};
  AdamSettings adam_c{5e-5, 0.5};
  AdamSettings adam_d{1e-3, 0.5};
  LossWeights loss_weights;
  double rho = 1.0;
  // lambda_id drops to 0 from this iteration on; 0 keeps it for the whole run.
  long long id_anneal_iterations = 10000;
  int segment_len = 128;
  std::uint64_t seed = 0;
  // Epochs between checkpoints; 0 writes only the final model.
  int checkpoint_every = 0;
  // Optimizer steps per iteration, taken in the order D, C, G.
  int steps_d = 1;
  int steps_c = 1;
  int steps_g = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
// Keys absent from `j` keep the values already in `cfg`.
void from_json(const nlohmann::json& j, TrainConfig& cfg);

struct TrainingUtterance {
  std::string id;
  McSegment x;  // raw (unstandardized) Q x N mel-cepstra
  std::size_t domain = 0;
};

// Reads the cached features of every manifest entry. Throws kIo for a missing
// cache file and kBackendMismatch when a header names another backend.
std::vector<TrainingUtterance> load_training_set(const Manifest& manifest,
                                                 const std::filesystem::path& cache_dir,
                                                 const DomainSet& domains,
                                                 const std::optional<std::string>& backend = std::nullopt);

struct MetricsRow {
  long long iteration = 0;
  int epoch = 0;
  double loss_adv_d = 0.0;
  double loss_cls_c = 0.0;
  double loss_adv_g = 0.0;
  double loss_cls_g = 0.0;
  double loss_cyc = 0.0;
  double loss_id = 0.0;
  double objective_g = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

// Uniform draw over 0..k-1; the target may equal the source.
std::size_t draw_target_domain(std::mt19937_64& rng, std::size_t k);
// Random window of `length` frames, zero-padded at the end when shorter.
McSegment random_crop(const McSegment& x, int length, std::mt19937_64& rng);

class Trainer {
 public:
  // Fits the feature normalization on `data` and initializes the model from cfg.seed.
  Trainer(TrainConfig cfg, DomainSet domains, std::vector<TrainingUtterance> data);
  // Restores model, optimizer state, counters and RNG. `cfg` may raise epochs
  // or change the output cadence; the architecture must match the checkpoint.
  static Trainer resume(const std::filesystem::path& checkpoint, std::optional<TrainConfig> cfg,
                        std::vector<TrainingUtterance> data);

  // Metrics CSV and checkpoints go here (created on demand).
  void set_output_dir(std::filesystem::path dir);
  void set_progress(std::function<void(const MetricsRow&)> callback);

  // Trains until config().epochs epochs are complete and returns the rows of this call.
  std::vector<MetricsRow> run();
  // One pass over the shuffled data.
  std::vector<MetricsRow> run_epoch();

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;

  const ModelBundle& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }
  long long iteration() const { return iteration_; }

 private:
  Trainer() = default;
  void check_data() const;
  void prepare_data();
  std::vector<TrainingSample> make_batch(std::span<const std::size_t> indices);
  MetricsRow step(std::span<const std::size_t> indices);
  void fail_non_finite(const std::string& what) const;

  TrainConfig cfg_;
  ModelBundle model_;
  std::vector<TrainingUtterance> data_;
  std::vector<McSegment> standardized_;
  nn::AdamState adam_g_, adam_d_, adam_c_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  long long iteration_ = 0;
  std::optional<std::filesystem::path> out_dir_;
  std::function<void(const MetricsRow&)> progress_;
};

struct ClassifierConfig {
  ArchConfig arch = ArchConfig::reference();
  int batch_size = 8;
  int epochs = 100;
  AdamSettings adam{1e-3, 0.9};
  int segment_len = 128;
  std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const ClassifierConfig& cfg);
void from_json(const nlohmann::json& j, ClassifierConfig& cfg);

// Trains only C on real segments; the returned bundle's G and D stay at their
// initial values. Used as a held-out judge of converted speech.
ModelBundle train_classifier(const ClassifierConfig& cfg, const DomainSet& domains,
                             const std::vector<TrainingUtterance>& data);

}  // namespace evc
