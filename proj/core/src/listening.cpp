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

#include "evc/listening.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <random>
#include <thread>

#include "httplib.h"

#include "evc/error.hpp"
#include "io_util.hpp"

namespace evc {
namespace {

std::uint64_t order_seed(std::uint64_t seed, const std::string& participant, ResponseTask task) {
  const std::string key = participant + '\x1f' + task_name(task);
  const auto crc = detail::crc32(std::span(reinterpret_cast<const std::uint8_t*>(key.data()), key.size()));
  return seed * 0x9e3779b97f4a7c15ULL ^ (static_cast<std::uint64_t>(crc) << 17 | key.size());
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const Error& e) {
  send_json(res, status, {{"error", std::string(error_code_name(e.code()))}, {"message", e.what()}});
}

}  // namespace

ListeningService::ListeningService(StimulusIndex index, std::filesystem::path index_dir,
                                   std::filesystem::path responses_path, DomainSet domains, std::uint64_t seed)
    : index_(std::move(index)),
      index_dir_(std::move(index_dir)),
      responses_path_(std::move(responses_path)),
      domains_(std::move(domains)),
      seed_(seed) {
  responses_ = read_responses(responses_path_, domains_);
  for (const auto& r : responses_) seen_.insert({r.participant_id, r.stimulus_id, r.task});
}

const StimulusEntry* ListeningService::find(const std::string& id) const {
  for (const auto& e : index_) {
    if (e.stimulus_id == id) return &e;
  }
  return nullptr;
}

std::vector<StimulusView> ListeningService::stimuli_for(const std::string& participant, ResponseTask task) const {
  if (participant.empty()) throw Error(ErrorCode::kInvalidArgument, "participant id is empty");
  std::vector<const StimulusEntry*> order;
  for (const auto& e : index_) order.push_back(&e);
  std::sort(order.begin(), order.end(),
            [](const StimulusEntry* a, const StimulusEntry* b) { return a->stimulus_id < b->stimulus_id; });
  std::mt19937_64 rng(order_seed(seed_, participant, task));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<StimulusView> out;
  for (const auto* e : order) {
    StimulusView v{e->stimulus_id, "/api/audio/" + e->stimulus_id, ""};
    if (task == ResponseTask::kEss) {
      const StimulusEntry* ref = nullptr;
      for (const auto& c : index_) {
        if (c.kind != StimulusKind::kOriginal || c.source != e->target) continue;
        if (!ref || c.phrase_id == e->phrase_id) ref = &c;
        if (c.phrase_id == e->phrase_id) break;
      }
      if (ref) v.reference_audio_url = "/api/audio/" + ref->stimulus_id;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::string> ListeningService::answered(const std::string& participant, ResponseTask task) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& r : responses_) {
    if (r.participant_id == participant && r.task == task) out.push_back(r.stimulus_id);
  }
  return out;
}

std::vector<std::uint8_t> ListeningService::audio(const std::string& stimulus_id) const {
  const StimulusEntry* e = find(stimulus_id);
  if (!e) throw Error(ErrorCode::kInvalidArgument, "unknown stimulus '" + stimulus_id + "'");
  return detail::read_file_bytes(index_dir_ / e->path);
}

ResponseRecord ListeningService::submit(ResponseRecord record) {
  validate_response(record, domains_);
  if (!find(record.stimulus_id)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown stimulus '" + record.stimulus_id + "'");
  }
  if (record.timestamp.empty()) record.timestamp = utc_now();
  std::lock_guard lock(mu_);
  const auto key = std::make_tuple(record.participant_id, record.stimulus_id, record.task);
  if (seen_.count(key)) {
    throw Error(ErrorCode::kDuplicate, "participant '" + record.participant_id + "' already answered " +
                                           record.stimulus_id + " for " + task_name(record.task));
  }
  append_response(responses_path_, record);
  seen_.insert(key);
  responses_.push_back(record);
  return record;
}

nlohmann::json ListeningService::tables(ResponseTask task) const {
  std::vector<ResponseRecord> snapshot;
  {
    std::lock_guard lock(mu_);
    snapshot = responses_;
  }
  const auto n = std::count_if(snapshot.begin(), snapshot.end(), [&](const ResponseRecord& r) { return r.task == task; });
  nlohmann::json out = {{"task", task_name(task)}, {"responses", n}};
  if (n == 0) return out;
  if (task == ResponseTask::kClassify) {
    const auto t = aggregate_classification(snapshot, index_, domains_);
    out["original"] = table_to_json(t.original);
    out["converted"] = table_to_json(t.converted);
    out["averaged"] = table_to_json(t.averaged);
  } else {
    out["scores"] = table_to_json(aggregate_scores(snapshot, index_, domains_, task));
  }
  return out;
}

struct ListeningServer::Impl {
  httplib::Server server;
  std::thread thread;
};

ListeningServer::ListeningServer(ListeningService& service) : impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  srv.Get("/api/stimuli", [&service](const httplib::Request& req, httplib::Response& res) {
    try {
      const std::string participant = req.get_param_value("participant");
      const ResponseTask task = parse_task(req.has_param("task") ? req.get_param_value("task") : "classify");
      nlohmann::json list = nlohmann::json::array();
      for (const auto& v : service.stimuli_for(participant, task)) {
        nlohmann::json item = {{"stimulus_id", v.stimulus_id}, {"audio_url", v.audio_url}};
        if (!v.reference_audio_url.empty()) item["reference_audio_url"] = v.reference_audio_url;
        list.push_back(item);
      }
      send_json(res, 200,
                {{"participant", participant},
                 {"task", task_name(task)},
                 {"labels", service.domains().labels()},
                 {"stimuli", list},
                 {"answered", service.answered(participant, task)}});
    } catch (const Error& e) {
      send_error(res, 400, e);
    }
  });

  srv.Get(R"(/api/audio/([A-Za-z0-9_\-]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto bytes = service.audio(req.matches[1]);
      res.status = 200;
      res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
    } catch (const Error& e) {
      send_error(res, e.code() == ErrorCode::kInvalidArgument ? 404 : 500, e);
    }
  });

  srv.Post("/api/responses", [&service](const httplib::Request& req, httplib::Response& res) {
    try {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidArgument, std::string("body is not JSON: ") + e.what());
      }
      const ResponseRecord stored = service.submit(response_from_json(body));
      send_json(res, 201, response_to_json(stored));
    } catch (const Error& e) {
      send_error(res, e.code() == ErrorCode::kDuplicate ? 409 : e.code() == ErrorCode::kIo ? 500 : 400, e);
    }
  });

  srv.Get(R"(/api/tables/([a-z]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, 200, service.tables(parse_task(req.matches[1])));
    } catch (const Error& e) {
      send_error(res, e.code() == ErrorCode::kInvalidArgument ? 400 : 500, e);
    }
  });

  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

ListeningServer::~ListeningServer() { stop(); }

int ListeningServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void ListeningServer::listen(const std::string& host, int port) {
  auto& srv = impl_->server;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  srv.listen_after_bind();
}

void ListeningServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace evc
