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
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "doctest.h"
#include "evc/checkpoint.hpp"
#include "evc/conversion.hpp"
#include "evc/corpus.hpp"
#include "evc/evaluation.hpp"
#include "reference_fixtures.hpp"
#include "temp_dir.hpp"
#include "toy_corpus.hpp"

using namespace evc;
using namespace evc::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result evc_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Four emotions of two training and the three held-out phrases.
fs::path small_corpus(const TempDir& dir) {
  ToyCorpusOptions opt;
  opt.phrases = {"aoi", "kaze", "amamizuwa", "midori", "nami"};
  write_toy_corpus(dir / "corpus", opt);
  return dir / "corpus";
}

}  // namespace

TEST_CASE("version, help and usage errors") {
  Result r = evc_run({"--version"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("evc 0.4.0") != std::string::npos);
  CHECK(evc_run({"--help"}).code == cli::kExitOk);
  CHECK(evc_run({}).code == cli::kExitUsage);
  CHECK(evc_run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(evc_run({"corpus"}).code == cli::kExitUsage);
  r = evc_run({"corpus", "scan", "--out", "x.jsonl"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("--root is required") != std::string::npos);
  CHECK(evc_run({"corpus", "scan", "--root", "r", "--out", "o", "--sample-rate", "fast"}).code == cli::kExitUsage);
  CHECK(evc_run({"corpus", "scan", "--root", "r", "--out", "o", "--no-such-flag"}).code == cli::kExitUsage);
}

TEST_CASE("failures exit 1 with a structured error") {
  TempDir dir;
  fs::create_directories(dir / "empty");
  Result r = evc_run({"--error-json", "corpus", "scan", "--root", (dir / "empty").string(), "--out",
                      (dir / "m.jsonl").string()});
  CHECK(r.code == cli::kExitFailure);
  const json e = json::parse(r.err);
  CHECK(e["error"] == "empty-corpus");
  CHECK(e["command"] == "corpus scan");
  CHECK(!e["message"].get<std::string>().empty());

  r = evc_run({"--error-json", "corpus", "scan", "--out", "x"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(json::parse(r.err)["error"] == "usage");

  write_json(dir / "bad.json", {{"no_such_key", 1}});
  r = evc_run({"--error-json", "corpus", "scan", "--config", (dir / "bad.json").string()});
  CHECK(r.code == cli::kExitFailure);
  CHECK(json::parse(r.err)["error"] == "config");
  std::ofstream(dir / "broken.json") << "{";
  CHECK(evc_run({"corpus", "scan", "--config", (dir / "broken.json").string()}).code == cli::kExitFailure);
  CHECK(evc_run({"corpus", "scan", "--config", (dir / "absent.json").string()}).code == cli::kExitFailure);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  TempDir dir;
  const fs::path corpus = small_corpus(dir);
  write_json(dir / "scan.json", {{"root", corpus.string()}, {"out", (dir / "cfg.jsonl").string()}, {"bit_depth", 16}});
  Result r = evc_run({"corpus", "scan", "--config", (dir / "scan.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("scanned 20 utterances") != std::string::npos);
  json echo = read_json(dir / "cfg.jsonl.effective-config.json");
  CHECK(echo["command"] == "corpus scan");
  CHECK(echo["version"] == "0.4.0");
  CHECK(echo["settings"]["sample_rate"] == 16000);
  CHECK(echo["settings"]["root"] == corpus.string());

  r = evc_run({"corpus", "scan", "--config", (dir / "scan.json").string(), "--out", (dir / "flag.jsonl").string(),
               "--domains", "neutral,sad"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(!fs::exists(dir / "cfg.jsonl.tmp"));
  echo = read_json(dir / "flag.jsonl.effective-config.json");
  CHECK(echo["settings"]["domains"] == json::array({"neutral", "sad"}));
  CHECK(read_manifest(dir / "flag.jsonl", DomainSet::defaults()).size() == 10);
  CHECK(r.out.find("10 outside the domain set") != std::string::npos);
}

TEST_CASE("end-to-end pipeline on a small corpus") {
  TempDir dir;
  const fs::path corpus = small_corpus(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };

  REQUIRE(evc_run({"corpus", "scan", "--root", corpus.string(), "--out", p("all.jsonl")}).code == 0);
  Result r = evc_run({"corpus", "split", "--manifest", p("all.jsonl"), "--train-out", p("train.jsonl"), "--test-out",
                      p("test.jsonl")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("8 train, 12 test") != std::string::npos);

  REQUIRE(evc_run({"features", "extract", "--manifest", p("train.jsonl"), "--out-dir", p("feats")}).code == 0);
  CHECK(fs::exists(dir / "feats" / "effective-config.json"));
  REQUIRE(evc_run({"prosody", "fit", "--manifest", p("train.jsonl"), "--cache-dir", p("feats"), "--out",
                   p("stats.json")})
              .code == 0);

  r = evc_run({"--seed", "5", "train", "--manifest", p("train.jsonl"), "--cache-dir", p("feats"), "--out-dir",
               p("run"), "--arch", "compact", "--epochs", "2", "--segment-len", "32", "--log-every", "1", "--checkpoint-every", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("epoch 1 iter") != std::string::npos);
  CHECK(r.out.find("trained 2 epochs (8 iterations)") != std::string::npos);
  const json echo = read_json(dir / "run" / "effective-config.json");
  CHECK(echo["settings"]["seed"] == 5);
  CHECK(echo["settings"]["train_config"]["epochs"] == 2);
  CHECK(echo["settings"]["train_config"]["arch"]["name"] == "compact-1d");
  CHECK(fs::exists(dir / "run" / "metrics.csv"));
  const ModelBundle model = load_model(dir / "run" / "model.evcm");
  CHECK(model.arch().name == "compact-1d");

  // Same seed, same model bytes: training is idempotent.
  REQUIRE(evc_run({"--seed", "5", "train", "--manifest", p("train.jsonl"), "--cache-dir", p("feats"), "--out-dir",
                   p("run2"), "--arch", "compact", "--epochs", "2", "--segment-len", "32", "--checkpoint-every", "2"})
              .code == 0);
  CHECK(slurp(dir / "run" / "model.evcm") == slurp(dir / "run2" / "model.evcm"));

  r = evc_run({"convert", "--model", p("run/model.evcm"), "--stats", p("stats.json"), "--manifest", p("test.jsonl"),
               "--out-dir", p("conv")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("wrote 48 stimuli") != std::string::npos);
  const StimulusIndex index = read_stimulus_index(dir / "conv" / "index.jsonl");
  CHECK(index.size() == 48);

  r = evc_run({"eval", "objective", "--index", p("conv/index.jsonl"), "--model", p("run/model.evcm"), "--out-dir",
               p("obj")});
  REQUIRE(r.code == 0);
  const json summary = read_json(dir / "obj" / "objective-summary.json");
  CHECK(summary["training"]["conversions"] == 36);
  CHECK(summary["training"]["chance"] == 0.25);
  CHECK(fs::exists(dir / "obj" / "objective-training-averaged.md"));
  CHECK(slurp(dir / "obj" / "objective-training.csv").find("source,target,neutral,joyful,angry,sad,n") == 0);

  // Listening-test responses keyed by the same opaque ids aggregate over the real index.
  for (const auto& rec : fixture_classify_responses()) append_response(dir / "responses.jsonl", rec);
  r = evc_run({"eval", "aggregate", "--responses", p("responses.jsonl"), "--index", p("conv/index.jsonl"),
               "--task", "classify", "--out-dir", p("tables")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("| neutral | 55.6% | 4.4% | 10.0% | 30.0% |") != std::string::npos);
  CHECK(fs::exists(dir / "tables" / "classify-averaged.csv"));
  CHECK(evc_run({"eval", "aggregate", "--responses", p("responses.jsonl"), "--index", p("conv/index.jsonl"), "--task",
                 "mos"})
            .code == cli::kExitFailure);

  r = evc_run({"prosody", "apply", "--input", p("feats") + "/" + feature_cache_name(read_manifest(dir / "train.jsonl", DomainSet::defaults()).front().id),
               "--output", p("shifted.evcf"), "--stats", p("stats.json"), "--source", "angry", "--target", "sad"});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "shifted.evcf"));

  // A model trained on 36 coefficients refuses 24-coefficient features on resume.
  REQUIRE(evc_run({"features", "extract", "--manifest", p("train.jsonl"), "--out-dir", p("feats24"), "--num-mcc",
                   "24"})
              .code == 0);
  r = evc_run({"--error-json", "train", "--manifest", p("train.jsonl"), "--cache-dir", p("feats24"), "--out-dir",
               p("run3"), "--arch", "compact", "--epochs", "3", "--resume", p("run/checkpoint-000002.evcm")});
  CHECK(r.code == cli::kExitFailure);
  CHECK(json::parse(r.err)["error"] == "config-mismatch");
}
