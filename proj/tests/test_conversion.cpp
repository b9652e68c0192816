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
#include <fstream>
#include <iterator>
#include <set>

#include "doctest.h"
#include "error_code.hpp"
#include "evc/conversion.hpp"
#include "temp_dir.hpp"
#include "tiny_models.hpp"
#include "toy_corpus.hpp"

using namespace evc;
using namespace evc::testing;

namespace {

F0StatsTable toy_stats() {
  const DomainSet d = DomainSet::defaults();
  F0StatsTable t;
  t["neutral"] = {d.find("neutral"), std::log(150.0), 0.10, 1000};
  t["joyful"] = {d.find("joyful"), std::log(220.0), 0.20, 1000};
  t["angry"] = {d.find("angry"), std::log(200.0), 0.25, 1000};
  t["sad"] = {d.find("sad"), std::log(120.0), 0.08, 1000};
  return t;
}

ModelBundle identity_model(int q = 36) {
  ModelBundle m(tiny_arch(q, 4), DomainSet::defaults(), FeatureNorm::identity(q));
  set_identity_generator(m);
  return m;
}

// G(x, c) = x + (index of c): every coefficient shifts by the target index.
ModelBundle shifting_model(int q = 36) {
  ModelBundle m = identity_model(q);
  const int in = q + 4;
  for (int o = 0; o < q; ++o) {
    for (int k = 0; k < 4; ++k) m.gen_params[static_cast<std::size_t>(o) * in + q + k] = k;
  }
  return m;
}

FeatureSequence toy_features(std::size_t phrase = 2, std::size_t emotion = 0) {
  const auto backend = make_backend(F0Method::kHarvest);
  const Waveform w = synth_toy_utterance(phrase, emotion, 16000, 7);
  return analyze(*backend, w.samples, w.sample_rate);
}

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(fa), {}) == std::string(std::istreambuf_iterator<char>(fb), {});
}

EmotionDomain dom(const char* label) { return DomainSet::defaults().find(label); }

}  // namespace

TEST_CASE("converted features keep frame count, voicing and aperiodicity") {
  const FeatureSequence in = toy_features();
  const FeatureSequence out = convert_features(in, dom("neutral"), dom("angry"), shifting_model(), toy_stats());
  REQUIRE(out.frames() == in.frames());
  CHECK(out.mcc.rows() == in.mcc.rows());
  CHECK(out.mcc.cols() == in.mcc.cols());
  CHECK(out.aperiodicity == in.aperiodicity);
  CHECK(out.frame_period == in.frame_period);
  CHECK(out.sample_rate == in.sample_rate);
  for (std::size_t n = 0; n < in.frames(); ++n) {
    CHECK((out.f0[n] == 0.0) == (in.f0[n] == 0.0));
    if (in.f0[n] > 0.0) {
      const double z = (std::log(in.f0[n]) - std::log(150.0)) / 0.10;
      CHECK(std::log(out.f0[n]) == doctest::Approx(std::log(200.0) + 0.25 * z).epsilon(1e-12));
    }
  }
  // angry has index 2, so the shift is 2 on every coefficient.
  CHECK((out.mcc - in.mcc).array().abs().maxCoeff() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK((out.mcc - in.mcc).array().abs().minCoeff() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("identity generator and same-domain statistics reproduce the input") {
  const FeatureSequence in = toy_features();
  const FeatureSequence out = convert_features(in, dom("sad"), dom("sad"), identity_model(), toy_stats());
  CHECK((out.mcc - in.mcc).array().abs().maxCoeff() < 1e-12);
  for (std::size_t n = 0; n < in.frames(); ++n) CHECK(out.f0[n] == doctest::Approx(in.f0[n]).epsilon(1e-12));
}

TEST_CASE("pass_through_c0 keeps the source energy coefficient") {
  const FeatureSequence in = toy_features();
  ConversionOptions opt;
  opt.pass_through_c0 = true;
  const FeatureSequence out = convert_features(in, dom("neutral"), dom("sad"), shifting_model(), toy_stats(), opt);
  CHECK(out.mcc.col(0) == in.mcc.col(0));
  CHECK((out.mcc.col(1) - in.mcc.col(1)).array().abs().minCoeff() == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("conversion errors") {
  const FeatureSequence in = toy_features();
  const ModelBundle m = identity_model();
  F0StatsTable missing = toy_stats();
  missing.erase("joyful");
  CHECK(error_code_of([&] { convert_features(in, dom("neutral"), dom("joyful"), m, missing); }) == ErrorCode::kStats);
  const EmotionDomain bored{"bored", 4};
  CHECK(error_code_of([&] { convert_features(in, dom("neutral"), bored, m, toy_stats()); }) == ErrorCode::kDomain);
  CHECK(error_code_of([&] { convert_features(in, dom("neutral"), dom("sad"), identity_model(24), toy_stats()); }) ==
        ErrorCode::kShape);
}

TEST_CASE("convert_utterance keeps the sample count") {
  const auto backend = make_backend(F0Method::kHarvest);
  for (std::size_t phrase : {0u, 5u}) {
    const Waveform w = synth_toy_utterance(phrase, 1, 16000, 7);
    const Waveform out = convert_utterance(*backend, w, dom("joyful"), dom("sad"), shifting_model(), toy_stats());
    CHECK(out.samples.size() == w.samples.size());
    CHECK(out.sample_rate == 16000);
    double peak = 0.0;
    for (double s : out.samples) peak = std::max(peak, std::abs(s));
    CHECK(20.0 * std::log10(peak) == doctest::Approx(-1.0).epsilon(1e-6));
  }
}

TEST_CASE("stimulus ids are opaque, stable and unique per (phrase, source, target)") {
  const std::string id = stimulus_id("nami", "neutral", "sad");
  CHECK(id == stimulus_id("nami", "neutral", "sad"));
  CHECK(id.find("nami") == std::string::npos);
  CHECK(id.find("sad") == std::string::npos);
  std::set<std::string> ids;
  const auto labels = DomainSet::defaults().labels();
  for (const char* p : {"amamizuwa", "midori", "nami"}) {
    for (const auto& s : labels) {
      for (const auto& t : labels) ids.insert(stimulus_id(p, s, t));
    }
  }
  CHECK(ids.size() == 48);
}

TEST_CASE("stimulus index JSONL round trip and decode errors") {
  const StimulusIndex idx = {
      {"s1", "neutral/nami", "nami", "neutral", "neutral", "original/s1.wav", StimulusKind::kOriginal},
      {"s2", "neutral/nami", "nami", "neutral", "sad", "converted/s2.wav", StimulusKind::kConverted}};
  CHECK(index_from_jsonl(index_to_jsonl(idx)) == idx);
  CHECK(error_code_of([] { index_from_jsonl(R"({"stimulus_id":"a"})"); }) == ErrorCode::kDecode);
  CHECK(error_code_of([] {
          index_from_jsonl(R"({"stimulus_id":"a","phrase_id":"p","source":"s","target":"t","path":"x","kind":"odd"})");
        }) == ErrorCode::kDecode);
}

TEST_CASE("a batch over 12 test utterances yields 36 conversions and 12 originals") {
  TempDir dir;
  ToyCorpusOptions opts;
  opts.phrases = {"amamizuwa", "midori", "nami"};
  write_toy_corpus(dir / "corpus", opts);
  const ScanResult scan = scan_corpus(dir / "corpus");
  REQUIRE(scan.refs.size() == 12);
  const auto backend = make_backend(F0Method::kHarvest);
  const auto targets = DomainSet::defaults().domains();

  const BatchResult r =
      convert_batch(*backend, scan.refs, targets, shifting_model(), toy_stats(), dir / "out");
  CHECK(r.failures.empty());
  REQUIRE(r.index.size() == 48);
  std::size_t originals = 0;
  std::set<std::string> ids;
  for (const auto& e : r.index) {
    ids.insert(e.stimulus_id);
    CHECK(std::filesystem::exists(dir / "out" / e.path));
    CHECK(e.stimulus_id == stimulus_id(e.phrase_id, e.source, e.target));
    if (e.kind == StimulusKind::kOriginal) {
      ++originals;
      CHECK(e.source == e.target);
    } else {
      CHECK(e.source != e.target);
      const auto ref = std::find_if(scan.refs.begin(), scan.refs.end(),
                                    [&](const UtteranceRef& u) { return u.id == e.utterance_id; });
      REQUIRE(ref != scan.refs.end());
      CHECK(read_wav(dir / "out" / e.path).samples.size() == read_wav(ref->audio_path).samples.size());
    }
  }
  CHECK(originals == 12);
  CHECK(ids.size() == 48);
  CHECK(read_stimulus_index(dir / "out" / "index.jsonl") == r.index);

  // Same inputs, same bytes.
  const BatchResult again =
      convert_batch(*backend, {scan.refs.front()}, targets, shifting_model(), toy_stats(), dir / "again");
  for (const auto& e : again.index) {
    CHECK(same_bytes(dir / "out" / e.path, dir / "again" / e.path));
  }
}

TEST_CASE("an empty target list writes originals only and failures are reported") {
  TempDir dir;
  ToyCorpusOptions opts;
  opts.phrases = {"nami"};
  write_toy_corpus(dir / "corpus", opts);
  Manifest refs = scan_corpus(dir / "corpus").refs;
  const auto backend = make_backend(F0Method::kHarvest);

  const BatchResult none = convert_batch(*backend, refs, {}, identity_model(), toy_stats(), dir / "none", {}, false);
  CHECK(none.index.empty());
  CHECK(none.failures.empty());
  CHECK(read_stimulus_index(dir / "none" / "index.jsonl").empty());

  refs.resize(1);
  refs.push_back(refs.front());
  refs.back().id = "neutral/ghost";
  refs.back().audio_path = (dir / "missing.wav").string();
  F0StatsTable partial = toy_stats();
  partial.erase("sad");
  const BatchResult r =
      convert_batch(*backend, refs, DomainSet::defaults().domains(), identity_model(), partial, dir / "partial");
  // The readable utterance gives its original plus joyful and angry; sad lacks statistics.
  CHECK(r.index.size() == 3);
  REQUIRE(r.failures.size() == 4);
  CHECK(r.failures[0].target == "sad");
  for (std::size_t i = 1; i < 4; ++i) CHECK(r.failures[i].utterance_id == "neutral/ghost");
}
