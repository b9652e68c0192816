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

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "evc/audio.hpp"
#include "evc/corpus.hpp"
#include "evc/domain.hpp"
#include "evc/error.hpp"
#include "error_code.hpp"
#include "temp_dir.hpp"
#include "toy_corpus.hpp"

using namespace evc;
using evc::testing::TempDir;
using evc::testing::error_code_of;

namespace {

// One shared 4 x 20 corpus; synthesis is the slow part.
const std::filesystem::path& toy_root() {
  static TempDir dir("evc-corpus");
  static const bool written = (evc::testing::write_toy_corpus(dir.path()), true);
  (void)written;
  return dir.path();
}

std::set<std::string> phrases_of(const Manifest& m) {
  std::set<std::string> out;
  for (const auto& r : m) out.insert(r.phrase_id);
  return out;
}

}  // namespace

TEST_CASE("default domain set is neutral, joyful, angry, sad in that order") {
  const DomainSet d = DomainSet::defaults();
  REQUIRE(d.size() == 4);
  CHECK(d.labels() == std::vector<std::string>{"neutral", "joyful", "angry", "sad"});
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.at(i).index == i);
  CHECK(d.find("angry").index == 2);
  CHECK(error_code_of([&] { d.find("bored"); }) == ErrorCode::kDomain);
  CHECK(error_code_of([] { DomainSet({"a", "a"}); }) == ErrorCode::kDomain);
}

TEST_CASE("domain codes must be one-hot") {
  const std::vector<double> ok = {0, 0, 1, 0};
  CHECK(DomainCode::from_vector(ok).index() == 2);
  for (const std::vector<double>& bad : std::vector<std::vector<double>>{
           {0, 0, 0, 0}, {1, 1, 0, 0}, {0.5, 0.5, 0, 0}, {0, 2, 0, 0}, {-1, 1, 1, 0}}) {
    CHECK(error_code_of([&] { DomainCode::from_vector(bad); }) == ErrorCode::kInvalidArgument);
  }
  CHECK(error_code_of([] { DomainCode(4, 4); }) == ErrorCode::kInvalidArgument);
  const auto v = DomainCode(1, 3).onehot();
  CHECK(v == std::vector<double>{0, 1, 0});
}

TEST_CASE("scan finds 4 emotions x 20 phrases") {
  const ScanResult r = scan_corpus(toy_root());
  CHECK(r.refs.size() == 80);
  CHECK(r.errors.empty());
  CHECK(phrases_of(r.refs).size() == 20);
  for (std::size_t i = 1; i < r.refs.size(); ++i) CHECK(r.refs[i - 1].id < r.refs[i].id);
  for (const auto& ref : r.refs) {
    CHECK(ref.sample_rate == 16000);
    CHECK(ref.bit_depth == 16);
    CHECK(ref.id == ref.emotion.label + "/" + ref.phrase_id);
  }
}

TEST_CASE("scan of an empty directory is an empty-corpus error") {
  TempDir dir;
  CHECK(error_code_of([&] { scan_corpus(dir.path()); }) == ErrorCode::kEmptyCorpus);
}

TEST_CASE("one truncated WAV among 80 gives 79 refs and one error entry") {
  TempDir dir;
  std::filesystem::copy(toy_root(), dir.path(), std::filesystem::copy_options::recursive);
  const auto victim = dir / "sad/midori.wav";
  std::filesystem::resize_file(victim, 30);
  const ScanResult r = scan_corpus(dir.path());
  CHECK(r.refs.size() == 79);
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].path.find("midori.wav") != std::string::npos);
}

TEST_CASE("non-16 kHz audio is refused unless resampling is allowed") {
  TempDir dir;
  Waveform w;
  w.sample_rate = 22050;
  w.samples.assign(22050, 0.1);
  std::filesystem::create_directories(dir / "neutral");
  write_wav(dir / "neutral/a.wav", w);
  w.sample_rate = 16000;
  write_wav(dir / "neutral/b.wav", w);
  ScanResult r = scan_corpus(dir.path());
  CHECK(r.refs.size() == 1);
  CHECK(r.errors.size() == 1);
  ScanOptions opt;
  opt.allow_resample = true;
  r = scan_corpus(dir.path(), opt);
  CHECK(r.refs.size() == 2);
}

TEST_CASE("files outside the domain set are skipped, not errors") {
  TempDir dir;
  Waveform w;
  w.samples.assign(8000, 0.1);
  std::filesystem::create_directories(dir / "neutral");
  std::filesystem::create_directories(dir / "bored");
  write_wav(dir / "neutral/a.wav", w);
  write_wav(dir / "bored/a.wav", w);
  const ScanResult r = scan_corpus(dir.path());
  CHECK(r.refs.size() == 1);
  CHECK(r.skipped == 1);
  CHECK(r.errors.empty());
}

TEST_CASE("a custom label rule maps flat file names") {
  TempDir dir;
  Waveform w;
  w.samples.assign(8000, 0.1);
  write_wav(dir / "midori_angry.wav", w);
  ScanOptions opt;
  opt.rule.pattern = R"(^([a-z]+)_([a-z]+)\.wav$)";
  opt.rule.phrase_group = 1;
  opt.rule.emotion_group = 2;
  const ScanResult r = scan_corpus(dir.path(), opt);
  REQUIRE(r.refs.size() == 1);
  CHECK(r.refs[0].phrase_id == "midori");
  CHECK(r.refs[0].emotion.label == "angry");
}

TEST_CASE("default split holds out amamizuwa, midori and nami: 68 train / 12 test") {
  const Manifest refs = scan_corpus(toy_root()).refs;
  const Split s = make_split(refs, SplitSpec::defaults());
  CHECK(s.train.size() == 68);
  CHECK(s.test.size() == 12);
  CHECK(phrases_of(s.test) == std::set<std::string>{"amamizuwa", "midori", "nami"});
  CHECK(phrases_of(s.train).size() == 17);

  // Partition: disjoint and covering, with every emotion of a phrase on one side.
  std::set<std::string> ids;
  for (const auto& r : s.train) ids.insert(r.id);
  for (const auto& r : s.test) CHECK(ids.insert(r.id).second);
  CHECK(ids.size() == refs.size());
  for (const auto& p : phrases_of(s.train)) CHECK(phrases_of(s.test).count(p) == 0);
}

TEST_CASE("split edge cases") {
  const Manifest refs = scan_corpus(toy_root()).refs;
  SplitSpec none;
  Split s = make_split(refs, none);
  CHECK(s.train.size() == 80);
  CHECK(s.test.empty());

  SplitSpec absent;
  absent.test_phrase_ids = {"midori", "kaeru"};
  CHECK(error_code_of([&] { make_split(refs, absent); }) == ErrorCode::kMissingPhrase);

  SplitSpec partial;
  partial.test_phrase_ids = {"midori"};
  partial.train_phrase_ids = std::set<std::string>{"nami"};
  CHECK(error_code_of([&] { make_split(refs, partial); }) == ErrorCode::kUnassignedPhrase);

  SplitSpec overlap;
  overlap.test_phrase_ids = {"midori"};
  overlap.train_phrase_ids = std::set<std::string>{"midori"};
  CHECK(error_code_of([&] { make_split(refs, overlap); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("manifests are deterministic and round-trip") {
  const Manifest a = scan_corpus(toy_root()).refs;
  const Manifest b = scan_corpus(toy_root()).refs;
  CHECK(manifest_to_jsonl(a) == manifest_to_jsonl(b));
  const Manifest back = manifest_from_jsonl(manifest_to_jsonl(a), DomainSet::defaults());
  CHECK(back == a);
  TempDir dir;
  write_manifest(dir / "m.jsonl", a);
  CHECK(read_manifest(dir / "m.jsonl", DomainSet::defaults()) == a);
}

TEST_CASE("manifest decoding rejects duplicates and unknown emotions") {
  const Manifest a = scan_corpus(toy_root()).refs;
  const std::string line = manifest_to_jsonl({a.front()});
  CHECK(error_code_of([&] { manifest_from_jsonl(line + line, DomainSet::defaults()); }) == ErrorCode::kDecode);
  CHECK_THROWS_AS(manifest_from_jsonl(line, DomainSet({"x", "y"})), Error);
  CHECK(error_code_of([] { manifest_from_jsonl("{not json\n", DomainSet::defaults()); }) == ErrorCode::kDecode);
}
