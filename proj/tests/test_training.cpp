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

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "error_code.hpp"
#include "evc/checkpoint.hpp"
#include "evc/training.hpp"
#include "synthetic_data.hpp"
#include "temp_dir.hpp"

using namespace evc;
using namespace evc::testing;

namespace {

TrainConfig small_config(int epochs) {
  TrainConfig cfg;
  cfg.arch = ArchConfig::compact();
  cfg.epochs = epochs;
  cfg.segment_len = 32;
  return cfg;
}

std::vector<TrainingUtterance> small_data(int q = 36) { return synthetic_utterances(1, 4, q, 40, 3); }

McSegment probe(int q, int n) {
  RowMatrix x(q, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = std::sin(0.37 * i);
  return McSegment(x);
}

ModelBundle probe_model() {
  const auto data = small_data();
  std::vector<McSegment> segs;
  for (const auto& u : data) segs.push_back(u.x);
  ModelBundle m(ArchConfig::compact(), DomainSet::defaults(), FeatureNorm::fit(segs));
  m.initialize(11);
  return m;
}

}  // namespace

TEST_CASE("TrainConfig defaults") {
  const TrainConfig c;
  CHECK(c.batch_size == 2);
  CHECK(c.epochs == 2000);
  CHECK(c.adam_g == AdamSettings{1e-3, 0.9});
  CHECK(c.adam_c == AdamSettings{5e-5, 0.5});
  CHECK(c.adam_d == AdamSettings{1e-3, 0.5});
  CHECK(c.loss_weights.lambda_cls == 1.0);
  CHECK(c.loss_weights.lambda_cyc == 1.0);
  CHECK(c.loss_weights.lambda_id == 1.0);
  CHECK(c.rho == 1.0);
  CHECK(c.segment_len == 128);
  CHECK(c.steps_d == 1);
  CHECK(c.steps_c == 1);
  CHECK(c.steps_g == 1);
  const nn::AdamConfig adam = c.adam_g.config();
  CHECK(adam.beta2 == 0.999);
  CHECK(adam.epsilon == 1e-8);
}

TEST_CASE("TrainConfig JSON round-trips and merges") {
  TrainConfig c = small_config(7);
  c.seed = 99;
  c.steps_c = 2;
  const nlohmann::json j = c;
  TrainConfig back;
  from_json(j, back);
  CHECK(nlohmann::json(back) == j);
  TrainConfig merged;
  from_json(nlohmann::json{{"epochs", 5}, {"adam_d", {{"alpha", 0.01}, {"beta1", 0.5}}}}, merged);
  CHECK(merged.epochs == 5);
  CHECK(merged.adam_d.alpha == 0.01);
  CHECK(merged.batch_size == 2);
  CHECK(merged.adam_g == AdamSettings{1e-3, 0.9});
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c = small_config(1);
  c.validate();
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& t) { t.batch_size = 0; }, [](TrainConfig& t) { t.epochs = -1; },
           [](TrainConfig& t) { t.rho = 0.0; }, [](TrainConfig& t) { t.loss_weights.lambda_cyc = -1.0; },
           [](TrainConfig& t) {
             t.arch = ArchConfig::reference();
             t.segment_len = 30;
           },
           [](TrainConfig& t) { t.adam_g.alpha = 0.0; }}) {
    TrainConfig bad = c;
    mutate(bad);
    CHECK(error_code_of([&] { bad.validate(); }) == ErrorCode::kConfig);
  }
}

TEST_CASE("target domains are uniform over all K (chi-square, 10k draws)") {
  std::mt19937_64 rng(2024);
  std::vector<int> counts(4, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts.at(draw_target_domain(rng, 4));
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - draws / 4.0) * (c - draws / 4.0) / (draws / 4.0);
  // Upper 1% point of chi-square with 3 degrees of freedom.
  CHECK(chi2 < 11.345);
  for (int c : counts) CHECK(c > 0);
}

TEST_CASE("random crops have the requested length and zero-pad short input") {
  std::mt19937_64 rng(1);
  const McSegment x = probe(4, 50);
  for (int t = 0; t < 20; ++t) {
    const McSegment c = random_crop(x, 32, rng);
    CHECK(c.n() == 32);
    bool found = false;
    for (int s = 0; s + 32 <= 50 && !found; ++s) found = c.values() == x.values().middleCols(s, 32);
    CHECK(found);
  }
  const McSegment p = random_crop(x, 64, rng);
  CHECK(p.n() == 64);
  CHECK(p.values().leftCols(50) == x.values());
  CHECK(p.values().rightCols(14).isZero());
}

TEST_CASE("checkpoint round trip reproduces forward outputs") {
  TempDir dir;
  const ModelBundle m = probe_model();
  save_model(dir / "m.evcm", m);
  const ModelBundle back = load_model(dir / "m.evcm");
  CHECK(back.arch() == m.arch());
  CHECK(back.domains() == m.domains());
  CHECK(back.norm() == m.norm());
  CHECK(back.gen_params == m.gen_params);
  const McSegment x = probe(36, 48);
  CHECK(generate(back, x, DomainCode(2, 4)).values() == generate(m, x, DomainCode(2, 4)).values());
  CHECK(discriminate(back, x, DomainCode(1, 4)) == discriminate(m, x, DomainCode(1, 4)));
  CHECK(classify(back, x) == classify(m, x));
}

TEST_CASE("checkpoint corruption is an integrity error") {
  const auto bytes = encode_checkpoint({probe_model(), nullptr, {}});
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "EVCM");
  auto flipped = bytes;
  flipped[bytes.size() / 3] ^= 1;
  CHECK(error_code_of([&] { decode_checkpoint(flipped); }) == ErrorCode::kIntegrity);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK(error_code_of([&] { decode_checkpoint(truncated); }) == ErrorCode::kIntegrity);
  auto magic = bytes;
  magic[1] = 'Z';
  CHECK(error_code_of([&] { decode_checkpoint(magic); }) == ErrorCode::kIntegrity);
  auto longer = bytes;
  longer.push_back(0);
  CHECK(error_code_of([&] { decode_checkpoint(longer); }) == ErrorCode::kIntegrity);
}

TEST_CASE("loading under a different architecture is refused") {
  TempDir dir;
  save_model(dir / "m.evcm", probe_model());
  const ArchConfig other = ArchConfig::compact(24, 4);
  CHECK(error_code_of([&] { load_model(dir / "m.evcm", &other); }) == ErrorCode::kConfigMismatch);
  const ArchConfig same = ArchConfig::compact();
  CHECK_NOTHROW(load_model(dir / "m.evcm", &same));
}

TEST_CASE("epochs = 0 returns the initialized bundle and no metrics") {
  TempDir dir;
  Trainer t(small_config(0), DomainSet::defaults(), small_data());
  t.set_output_dir(dir.path());
  CHECK(t.run().empty());
  CHECK(t.epoch() == 0);
  CHECK(t.iteration() == 0);
  const ModelBundle fresh = probe_model();
  ModelBundle expected(ArchConfig::compact(), DomainSet::defaults(), t.model().norm());
  expected.initialize(0);
  CHECK(t.model().gen_params == expected.gen_params);
  CHECK(t.model().disc_params == expected.disc_params);
  CHECK(t.model().cls_params == expected.cls_params);
  CHECK(std::filesystem::exists(dir / "model.evcm"));
  CHECK(!std::filesystem::exists(dir / "metrics.csv"));
}

TEST_CASE("a domain without data is a configuration error") {
  auto data = small_data();
  data.pop_back();  // drops the only "sad" utterance
  CHECK(error_code_of([&] { Trainer(small_config(1), DomainSet::defaults(), data); }) == ErrorCode::kConfig);
}

TEST_CASE("one epoch logs every iteration with finite losses") {
  TempDir dir;
  auto data = synthetic_utterances(3, 4, 36, 40, 5);
  Trainer t(small_config(1), DomainSet::defaults(), data);
  t.set_output_dir(dir.path());
  std::vector<MetricsRow> seen;
  t.set_progress([&](const MetricsRow& r) { seen.push_back(r); });
  const auto rows = t.run();
  CHECK(rows.size() == 6);  // 12 utterances, batch 2
  CHECK(seen == rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].iteration == static_cast<long long>(i));
    CHECK(std::isfinite(rows[i].loss_adv_d));
    CHECK(std::isfinite(rows[i].loss_adv_g));
    CHECK(rows[i].loss_adv_d >= 0.0);
    CHECK(rows[i].loss_cls_c >= 0.0);
  }
  CHECK(read_metrics_csv(dir / "metrics.csv") == rows);
  std::ifstream in(dir / "metrics.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header + "\n" == metrics_csv_header());
}

TEST_CASE("checkpoints are written at the configured cadence") {
  TempDir dir;
  TrainConfig cfg = small_config(4);
  cfg.checkpoint_every = 2;
  Trainer t(cfg, DomainSet::defaults(), small_data());
  t.set_output_dir(dir.path());
  t.run();
  CHECK(std::filesystem::exists(dir / "checkpoint-000002.evcm"));
  CHECK(std::filesystem::exists(dir / "checkpoint-000004.evcm"));
  CHECK(!std::filesystem::exists(dir / "checkpoint-000001.evcm"));
  const Checkpoint ck = load_checkpoint(dir / "checkpoint-000002.evcm");
  CHECK(ck.state.at("epoch") == 2);
  CHECK(ck.find_extra("adam_g.m") != nullptr);
}

TEST_CASE("resume refuses mismatched Q and corrupted files") {
  TempDir dir;
  Trainer t(small_config(1), DomainSet::defaults(), small_data());
  t.run();
  t.save(dir / "ck.evcm");
  TrainConfig q24 = small_config(2);
  q24.arch = ArchConfig::compact(24, 4);
  CHECK(error_code_of([&] { Trainer::resume(dir / "ck.evcm", q24, small_data(24)); }) == ErrorCode::kConfigMismatch);
  CHECK(error_code_of([&] { Trainer::resume(dir / "ck.evcm", std::nullopt, small_data(24)); }) ==
        ErrorCode::kConfigMismatch);
  std::filesystem::resize_file(dir / "ck.evcm", std::filesystem::file_size(dir / "ck.evcm") - 100);
  CHECK(error_code_of([&] { Trainer::resume(dir / "ck.evcm", std::nullopt, small_data()); }) == ErrorCode::kIntegrity);
  save_model(dir / "bare.evcm", probe_model());
  CHECK(error_code_of([&] { Trainer::resume(dir / "bare.evcm", std::nullopt, small_data()); }) == ErrorCode::kConfig);
}

TEST_CASE("non-finite losses abort with a diagnostic checkpoint") {
  TempDir dir;
  TrainConfig cfg = small_config(3);
  cfg.adam_g.alpha = 1e250;
  cfg.adam_d.alpha = 1e250;
  Trainer t(cfg, DomainSet::defaults(), small_data());
  t.set_output_dir(dir.path());
  CHECK(error_code_of([&] { t.run(); }) == ErrorCode::kNonFinite);
  CHECK(std::filesystem::exists(dir / "diagnostic.evcm"));
}

TEST_CASE("missing feature caches are reported") {
  TempDir dir;
  Manifest m = {{"neutral/a", "x.wav", "a", {"neutral", 0}, 16000, 16}};
  CHECK(error_code_of([&] { load_training_set(m, dir.path(), DomainSet::defaults()); }) == ErrorCode::kIo);
}

TEST_CASE("a stand-alone classifier learns separable domains") {
  const auto data = synthetic_utterances(4, 4, 36, 48, 8);
  ClassifierConfig cfg;
  cfg.arch = ArchConfig::compact();
  cfg.epochs = 15;
  cfg.segment_len = 32;
  const ModelBundle judge = train_classifier(cfg, DomainSet::defaults(), data);
  const auto held_out = synthetic_utterances(2, 4, 36, 48, 99);
  int right = 0;
  for (const auto& u : held_out) {
    const auto p = classify(judge, judge.norm().standardize(u.x));
    right += static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == u.domain;
  }
  CHECK(right >= 7);
  const nlohmann::json j = cfg;
  ClassifierConfig back;
  from_json(j, back);
  CHECK(nlohmann::json(back) == j);
}

TEST_CASE("same seed gives bit-identical traces and resume continues the trace") {
  const auto data = synthetic_utterances(2, 4, 36, 40, 21);
  TrainConfig cfg = small_config(6);
  cfg.seed = 17;
  Trainer a(cfg, DomainSet::defaults(), data);
  const auto full = a.run();
  Trainer b(cfg, DomainSet::defaults(), data);
  CHECK(b.run() == full);

  TempDir dir;
  TrainConfig half = cfg;
  half.epochs = 3;
  Trainer first(half, DomainSet::defaults(), data);
  auto trace = first.run();
  first.save(dir / "ck.evcm");
  Trainer second = Trainer::resume(dir / "ck.evcm", cfg, data);
  CHECK(second.epoch() == 3);
  const auto rest = second.run();
  trace.insert(trace.end(), rest.begin(), rest.end());
  REQUIRE(trace.size() == full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    CHECK(trace[i].iteration == full[i].iteration);
    CHECK(trace[i].loss_adv_d == doctest::Approx(full[i].loss_adv_d).epsilon(1e-6));
    CHECK(trace[i].loss_cls_c == doctest::Approx(full[i].loss_cls_c).epsilon(1e-6));
    CHECK(trace[i].loss_cyc == doctest::Approx(full[i].loss_cyc).epsilon(1e-6));
    CHECK(trace[i].loss_id == doctest::Approx(full[i].loss_id).epsilon(1e-6));
  }
  CHECK(second.model().gen_params == a.model().gen_params);
}
