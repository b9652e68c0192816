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
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "evc/conversion.hpp"
#include "evc/evaluation.hpp"

namespace evc {

struct StimulusView {
  std::string stimulus_id;
  std::string audio_url;
  std::string reference_audio_url;  // ess only: an original of the target emotion
};

// Listening-test state behind the HTTP endpoints: presentation order, audio
// lookup and the append-only response log. Thread-safe.
class ListeningService {
 public:
  ListeningService(StimulusIndex index, std::filesystem::path index_dir, std::filesystem::path responses_path,
                   DomainSet domains, std::uint64_t seed);

  // Every stimulus in a participant-specific order that is stable across calls.
  std::vector<StimulusView> stimuli_for(const std::string& participant, ResponseTask task) const;
  // Stimulus ids this participant already answered for `task`.
  std::vector<std::string> answered(const std::string& participant, ResponseTask task) const;
  // Throws kInvalidArgument for an unknown id.
  std::vector<std::uint8_t> audio(const std::string& stimulus_id) const;
  // Validates, rejects (participant, stimulus, task) repeats with kDuplicate,
  // fills a missing timestamp and appends to the log.
  ResponseRecord submit(ResponseRecord record);
  // Current aggregate for `task`; {"responses": 0} until something arrives.
  nlohmann::json tables(ResponseTask task) const;

  const DomainSet& domains() const { return domains_; }
  const StimulusIndex& index() const { return index_; }

 private:
  const StimulusEntry* find(const std::string& id) const;

  StimulusIndex index_;
  std::filesystem::path index_dir_;
  std::filesystem::path responses_path_;
  DomainSet domains_;
  std::uint64_t seed_;
  mutable std::mutex mu_;
  std::vector<ResponseRecord> responses_;
  std::set<std::tuple<std::string, std::string, ResponseTask>> seen_;
};

// HTTP front end:
//   GET  /api/stimuli?participant=<id>&task=<classify|mos|ess>
//   GET  /api/audio/<stimulus_id>
//   POST /api/responses     (201 appended, 400 invalid, 409 duplicate)
//   GET  /api/tables/<task>
class ListeningServer {
 public:
  explicit ListeningServer(ListeningService& service);
  ~ListeningServer();
  ListeningServer(const ListeningServer&) = delete;
  ListeningServer& operator=(const ListeningServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace evc
