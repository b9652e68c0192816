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

#include <algorithm>
#include <filesystem>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "error_code.hpp"
#include "evc/audio.hpp"
#include "evc/listening.hpp"
#include "httplib.h"
#include "reference_fixtures.hpp"
#include "temp_dir.hpp"

using namespace evc;
using namespace evc::testing;
using nlohmann::json;

namespace {

// Fixture index with a short tone per stimulus on disk.
struct Site {
  TempDir dir;
  StimulusIndex index = fixture_index();

  Site() {
    std::filesystem::create_directories(dir / "original");
    std::filesystem::create_directories(dir / "converted");
    for (std::size_t i = 0; i < index.size(); ++i) {
      Waveform w;
      w.sample_rate = 16000;
      w.samples.assign(160 + i, 0.1);
      write_wav(dir / index[i].path, w);
    }
  }

  ListeningService service(std::uint64_t seed = 0) const {
    return ListeningService(index, dir.path(), dir / "responses.jsonl", DomainSet::defaults(), seed);
  }
};

std::vector<std::string> ids_of(const std::vector<StimulusView>& v) {
  std::vector<std::string> out;
  for (const auto& s : v) out.push_back(s.stimulus_id);
  return out;
}

json classify_body(const std::string& participant, const std::string& stimulus, const std::string& label) {
  return {{"participant_id", participant}, {"stimulus_id", stimulus}, {"task", "classify"}, {"value", label}};
}

}  // namespace

TEST_CASE("presentation order is a stable per-participant permutation") {
  const Site site;
  const ListeningService svc = site.service(3);
  const auto a1 = ids_of(svc.stimuli_for("alice", ResponseTask::kClassify));
  const auto a2 = ids_of(svc.stimuli_for("alice", ResponseTask::kClassify));
  const auto b = ids_of(svc.stimuli_for("bob", ResponseTask::kClassify));
  CHECK(a1.size() == 48);
  CHECK(a1 == a2);
  CHECK(a1 != b);
  auto sorted_a = a1, sorted_b = b;
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  CHECK(sorted_a == sorted_b);
  CHECK(std::set<std::string>(a1.begin(), a1.end()).size() == 48);
  // Index order in the file does not matter.
  StimulusIndex reversed = site.index;
  std::reverse(reversed.begin(), reversed.end());
  const ListeningService svc_r(reversed, site.dir.path(), site.dir / "r.jsonl", DomainSet::defaults(), 3);
  CHECK(ids_of(svc_r.stimuli_for("alice", ResponseTask::kClassify)) == a1);
  CHECK(ids_of(site.service(4).stimuli_for("alice", ResponseTask::kClassify)) != a1);
  CHECK(error_code_of([&] { svc.stimuli_for("", ResponseTask::kClassify); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("similarity trials carry an original reference of the target emotion") {
  const Site site;
  const ListeningService svc = site.service();
  for (const auto& v : svc.stimuli_for("carol", ResponseTask::kEss)) {
    const auto e = std::find_if(site.index.begin(), site.index.end(), [&](auto& x) { return x.stimulus_id == v.stimulus_id; });
    REQUIRE(!v.reference_audio_url.empty());
    CHECK(v.reference_audio_url == "/api/audio/" + stimulus_id(e->phrase_id, e->target, e->target));
  }
  for (const auto& v : svc.stimuli_for("carol", ResponseTask::kMos)) CHECK(v.reference_audio_url.empty());
}

TEST_CASE("submissions are validated, deduplicated and persisted") {
  const Site site;
  const std::string sid = site.index[1].stimulus_id;
  {
    ListeningService svc = site.service();
    const ResponseRecord stored = svc.submit({"p1", sid, ResponseTask::kClassify, "sad", 0, ""});
    CHECK(stored.timestamp.size() == 20);
    CHECK(stored.timestamp.back() == 'Z');
    CHECK(error_code_of([&] { svc.submit({"p1", sid, ResponseTask::kClassify, "angry", 0, ""}); }) ==
          ErrorCode::kDuplicate);
    // The same stimulus under another task or by another listener is fine.
    svc.submit({"p1", sid, ResponseTask::kMos, "", 3, ""});
    svc.submit({"p2", sid, ResponseTask::kClassify, "angry", 0, "x"});
    CHECK(error_code_of([&] { svc.submit({"p1", "unknown", ResponseTask::kMos, "", 3, ""}); }) ==
          ErrorCode::kInvalidArgument);
    CHECK(error_code_of([&] { svc.submit({"p1", sid, ResponseTask::kEss, "", 9, ""}); }) == ErrorCode::kInvalidArgument);
    CHECK(svc.answered("p1", ResponseTask::kClassify) == std::vector<std::string>{sid});
  }
  CHECK(read_responses(site.dir / "responses.jsonl", DomainSet::defaults()).size() == 3);
  ListeningService reopened = site.service();
  CHECK(error_code_of([&] { reopened.submit({"p2", sid, ResponseTask::kClassify, "sad", 0, ""}); }) ==
        ErrorCode::kDuplicate);
  CHECK(reopened.tables(ResponseTask::kClassify).at("responses") == 2);
  CHECK(reopened.tables(ResponseTask::kEss) == json{{"task", "ess"}, {"responses", 0}});
}

TEST_CASE("HTTP endpoints") {
  const Site site;
  ListeningService svc = site.service(1);
  ListeningServer server(svc);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/api/stimuli?participant=dave&task=classify");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  json body = json::parse(res->body);
  CHECK(body["labels"] == DomainSet::defaults().labels());
  REQUIRE(body["stimuli"].size() == 48);
  CHECK(body["answered"].empty());
  const std::string first = body["stimuli"][0]["stimulus_id"];
  CHECK(body["stimuli"][0]["audio_url"] == "/api/audio/" + first);
  CHECK(json::parse(cli.Get("/api/stimuli?participant=dave&task=classify")->body)["stimuli"] == body["stimuli"]);
  CHECK(cli.Get("/api/stimuli?task=classify")->status == 400);
  CHECK(cli.Get("/api/stimuli?participant=dave&task=rank")->status == 400);

  res = cli.Get("/api/audio/" + first);
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "audio/wav");
  CHECK(res->body.substr(0, 4) == "RIFF");
  CHECK(cli.Get("/api/audio/s0000")->status == 404);

  res = cli.Post("/api/responses", classify_body("dave", first, "joyful").dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  CHECK(json::parse(res->body)["value"] == "joyful");
  res = cli.Post("/api/responses", classify_body("dave", first, "sad").dump(), "application/json");
  CHECK(res->status == 409);
  CHECK(json::parse(res->body)["error"] == "duplicate");
  CHECK(cli.Post("/api/responses", classify_body("dave", first, "bored").dump(), "application/json")->status == 400);
  CHECK(cli.Post("/api/responses", "{not json", "application/json")->status == 400);
  CHECK(cli.Post("/api/responses", classify_body("dave", "s123", "sad").dump(), "application/json")->status == 400);
  CHECK(json::parse(cli.Get("/api/stimuli?participant=dave&task=classify")->body)["answered"] == json::array({first}));

  res = cli.Get("/api/tables/classify");
  REQUIRE(res);
  CHECK(res->status == 200);
  body = json::parse(res->body);
  CHECK(body["responses"] == 1);
  CHECK(body.contains("original"));
  CHECK(body["averaged"]["layout"] == "target");
  CHECK(json::parse(cli.Get("/api/tables/mos")->body) == json{{"task", "mos"}, {"responses", 0}});
  CHECK(cli.Get("/api/tables/rank")->status == 400);

  res = cli.Options("/api/responses");
  REQUIRE(res);
  CHECK(res->status == 204);
  CHECK(res->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  server.stop();
}

TEST_CASE("concurrent submissions are all recorded exactly once") {
  const Site site;
  ListeningService svc = site.service();
  ListeningServer server(svc);
  const int port = server.start("127.0.0.1", 0);
  std::vector<std::thread> workers;
  std::vector<int> created(4, 0), conflicts(4, 0);
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      httplib::Client cli("127.0.0.1", port);
      for (const auto& e : site.index) {
        // Two workers share each participant, so every record is raced.
        const json b = {{"participant_id", "p" + std::to_string(w % 2)},
                        {"stimulus_id", e.stimulus_id},
                        {"task", "mos"},
                        {"value", 1 + w}};
        const auto res = cli.Post("/api/responses", b.dump(), "application/json");
        if (res && res->status == 201) ++created[w];
        if (res && res->status == 409) ++conflicts[w];
      }
    });
  }
  for (auto& t : workers) t.join();
  server.stop();
  int total = 0, dup = 0;
  for (int w = 0; w < 4; ++w) {
    total += created[w];
    dup += conflicts[w];
  }
  CHECK(total == 96);
  CHECK(dup == 96);
  const auto log = read_responses(site.dir / "responses.jsonl", DomainSet::defaults());
  CHECK(log.size() == 96);
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& r : log) keys.insert({r.participant_id, r.stimulus_id});
  CHECK(keys.size() == 96);
}

TEST_CASE("fixture responses posted over HTTP aggregate like the offline path") {
  const Site site;
  ListeningService svc = site.service();
  ListeningServer server(svc);
  httplib::Client cli("127.0.0.1", server.start("127.0.0.1", 0));
  const auto responses = fixture_classify_responses();
  for (const auto& r : responses) {
    const auto res = cli.Post("/api/responses", response_to_json(r).dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 201);
  }
  const json live = json::parse(cli.Get("/api/tables/classify")->body);
  server.stop();
  const auto offline = aggregate_classification(responses, site.index, DomainSet::defaults());
  CHECK(live["averaged"] == table_to_json(offline.averaged));
  CHECK(live["converted"] == table_to_json(offline.converted));
  CHECK(live["responses"] == responses.size());
}
