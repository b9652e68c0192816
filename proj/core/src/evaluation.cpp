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

#include "evc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

#include "evc/audio.hpp"
#include "evc/error.hpp"
#include "io_util.hpp"

namespace evc {
namespace {

std::string fixed(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_up(v, decimals));
  return buf;
}

std::map<std::string, const StimulusEntry*> by_id(const StimulusIndex& index) {
  std::map<std::string, const StimulusEntry*> out;
  for (const auto& e : index) out[e.stimulus_id] = &e;
  return out;
}

const StimulusEntry& lookup(const std::map<std::string, const StimulusEntry*>& ids, const std::string& id) {
  auto it = ids.find(id);
  if (it == ids.end()) throw Error(ErrorCode::kInvalidArgument, "response refers to unknown stimulus '" + id + "'");
  return *it->second;
}

ConfusionRow empty_row(std::string source, std::string target, std::size_t k) {
  ConfusionRow r;
  r.source = std::move(source);
  r.target = std::move(target);
  r.counts.assign(k, 0);
  return r;
}

void finalize(ConfusionRow& r) {
  r.percent.clear();
  if (r.total == 0) return;
  for (std::size_t c : r.counts) r.percent.push_back(100.0 * static_cast<double>(c) / static_cast<double>(r.total));
}

ConfusionTable original_layout(const DomainSet& domains) {
  ConfusionTable t;
  t.layout = ConfusionTable::Layout::kOriginal;
  t.labels = domains.labels();
  for (const auto& l : t.labels) t.rows.push_back(empty_row(l, l, t.labels.size()));
  return t;
}

ConfusionTable pair_layout(const DomainSet& domains) {
  ConfusionTable t;
  t.layout = ConfusionTable::Layout::kSourceTarget;
  t.labels = domains.labels();
  for (const auto& s : t.labels) {
    for (const auto& g : t.labels) {
      if (s != g) t.rows.push_back(empty_row(s, g, t.labels.size()));
    }
  }
  return t;
}

ConfusionRow* find_row(ConfusionTable& t, const std::string& source, const std::string& target) {
  return const_cast<ConfusionRow*>(static_cast<const ConfusionTable&>(t).find(source, target));
}

std::size_t column(const ConfusionTable& t, const std::string& label) {
  auto it = std::find(t.labels.begin(), t.labels.end(), label);
  if (it == t.labels.end()) throw Error(ErrorCode::kInvalidArgument, "label '" + label + "' outside the domain set");
  return static_cast<std::size_t>(it - t.labels.begin());
}

std::optional<double> mean_of(const std::vector<const ScoreCell*>& cells) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto* c : cells) {
    if (c->mean) {
      acc += *c->mean;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc / static_cast<double>(n);
}

std::string score_text(const ScoreCell& c) { return c.mean ? fixed(*c.mean, 2) : "--"; }

}  // namespace

double mcd(const McSegment& a, const McSegment& b, bool exclude_c0) {
  if (a.q() != b.q() || a.n() != b.n()) {
    throw Error(ErrorCode::kShape, "mcd needs equal shapes");
  }
  const int first = exclude_c0 ? 1 : 0;
  if (a.n() == 0 || a.q() <= first) throw Error(ErrorCode::kShape, "mcd needs at least one frame and coefficient");
  const double scale = 10.0 / std::numbers::ln10 * std::numbers::sqrt2;
  double acc = 0.0;
  for (int n = 0; n < a.n(); ++n) {
    double ss = 0.0;
    for (int q = first; q < a.q(); ++q) {
      const double d = a.values()(q, n) - b.values()(q, n);
      ss += d * d;
    }
    acc += std::sqrt(ss);
  }
  return scale * acc / a.n();
}

double round_half_up(double value, int decimals) {
  const double p = std::pow(10.0, decimals);
  const double scaled = value * p;
  return std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, std::abs(scaled))) / p;
}

std::string task_name(ResponseTask task) {
  switch (task) {
    case ResponseTask::kClassify:
      return "classify";
    case ResponseTask::kMos:
      return "mos";
    case ResponseTask::kEss:
      return "ess";
  }
  return "classify";
}

ResponseTask parse_task(const std::string& name) {
  if (name == "classify") return ResponseTask::kClassify;
  if (name == "mos") return ResponseTask::kMos;
  if (name == "ess") return ResponseTask::kEss;
  throw Error(ErrorCode::kInvalidArgument, "unknown task '" + name + "' (classify, mos, ess)");
}

void validate_response(const ResponseRecord& r, const DomainSet& domains) {
  if (r.participant_id.empty()) throw Error(ErrorCode::kInvalidArgument, "participant_id is empty");
  if (r.stimulus_id.empty()) throw Error(ErrorCode::kInvalidArgument, "stimulus_id is empty");
  if (r.task == ResponseTask::kClassify) {
    if (!domains.contains(r.label)) {
      throw Error(ErrorCode::kInvalidArgument, "classification label '" + r.label + "' outside the domain set");
    }
  } else if (r.score < 1 || r.score > 5) {
    throw Error(ErrorCode::kInvalidArgument, task_name(r.task) + " score must be an integer 1-5");
  }
}

nlohmann::json response_to_json(const ResponseRecord& r) {
  nlohmann::json j = {{"participant_id", r.participant_id},
                      {"stimulus_id", r.stimulus_id},
                      {"task", task_name(r.task)},
                      {"timestamp", r.timestamp}};
  if (r.task == ResponseTask::kClassify) {
    j["value"] = r.label;
  } else {
    j["value"] = r.score;
  }
  return j;
}

ResponseRecord response_from_json(const nlohmann::json& j) {
  try {
    ResponseRecord r;
    r.participant_id = j.at("participant_id").get<std::string>();
    r.stimulus_id = j.at("stimulus_id").get<std::string>();
    r.task = parse_task(j.at("task").get<std::string>());
    const auto& v = j.at("value");
    if (r.task == ResponseTask::kClassify) {
      if (!v.is_string()) throw Error(ErrorCode::kInvalidArgument, "classification value must be a label");
      r.label = v.get<std::string>();
    } else {
      if (!v.is_number_integer()) throw Error(ErrorCode::kInvalidArgument, "score value must be an integer");
      r.score = v.get<int>();
    }
    r.timestamp = j.value("timestamp", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("response record: ") + e.what());
  }
}

std::vector<ResponseRecord> responses_from_jsonl(const std::string& text, const DomainSet& domains,
                                                 const std::string& source) {
  std::vector<ResponseRecord> out;
  for (const auto& row : detail::parse_jsonl(text, source)) {
    ResponseRecord r = response_from_json(row);
    validate_response(r, domains);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ResponseRecord> read_responses(const std::filesystem::path& path, const DomainSet& domains) {
  if (!std::filesystem::exists(path)) return {};
  return responses_from_jsonl(detail::read_text_file(path), domains, path.string());
}

void append_response(const std::filesystem::path& path, const ResponseRecord& record) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  out << response_to_json(record).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
}

const ConfusionRow* ConfusionTable::find(const std::string& source, const std::string& target) const {
  for (const auto& r : rows) {
    if (r.source == source && r.target == target) return &r;
  }
  return nullptr;
}

ConfusionTable average_over_sources(const ConfusionTable& converted) {
  ConfusionTable t;
  t.layout = ConfusionTable::Layout::kTarget;
  t.labels = converted.labels;
  const std::size_t k = t.labels.size();
  for (const auto& target : t.labels) {
    ConfusionRow row = empty_row("", target, k);
    std::vector<double> sum(k, 0.0);
    std::size_t contributing = 0;
    for (const auto& r : converted.rows) {
      if (r.target != target) continue;
      for (std::size_t c = 0; c < k; ++c) row.counts[c] += r.counts[c];
      row.total += r.total;
      if (r.percent.empty()) continue;
      for (std::size_t c = 0; c < k; ++c) sum[c] += r.percent[c];
      ++contributing;
    }
    if (contributing > 0) {
      for (double& v : sum) v /= static_cast<double>(contributing);
      row.percent = std::move(sum);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ClassificationTables aggregate_classification(const std::vector<ResponseRecord>& responses,
                                              const StimulusIndex& index, const DomainSet& domains) {
  ClassificationTables out;
  out.original = original_layout(domains);
  out.converted = pair_layout(domains);
  const auto ids = by_id(index);
  std::size_t used = 0;
  for (const auto& r : responses) {
    if (r.task != ResponseTask::kClassify) continue;
    validate_response(r, domains);
    const StimulusEntry& e = lookup(ids, r.stimulus_id);
    ConfusionTable& table = e.kind == StimulusKind::kOriginal ? out.original : out.converted;
    ConfusionRow* row = find_row(table, e.source, e.kind == StimulusKind::kOriginal ? e.source : e.target);
    if (!row) throw Error(ErrorCode::kInvalidArgument, "stimulus '" + e.stimulus_id + "' has labels outside the domain set");
    ++row->counts[column(table, r.label)];
    ++row->total;
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::kEmptyTable, "no classification responses");
  for (auto& r : out.original.rows) finalize(r);
  for (auto& r : out.converted.rows) finalize(r);
  out.averaged = average_over_sources(out.converted);
  return out;
}

ConfusionTable objective_confusion(const std::vector<PredictedStimulus>& predictions, const DomainSet& domains) {
  ConfusionTable t = pair_layout(domains);
  for (const auto& p : predictions) {
    ConfusionRow* row = find_row(t, p.source, p.target);
    if (!row) throw Error(ErrorCode::kInvalidArgument, "no converted-data row for " + p.source + " -> " + p.target);
    ++row->counts[column(t, p.predicted)];
    ++row->total;
  }
  for (auto& r : t.rows) finalize(r);
  return t;
}

std::vector<PredictedStimulus> classify_stimuli(const StimulusIndex& index, const std::filesystem::path& index_dir,
                                                const ModelBundle& classifier, const VocoderBackend& backend,
                                                const AnalysisOptions& analysis) {
  std::vector<PredictedStimulus> out;
  for (const auto& e : index) {
    if (e.kind != StimulusKind::kConverted) continue;
    const Waveform w = read_wav(index_dir / e.path);
    const FeatureSequence f = analyze(backend, w.samples, w.sample_rate, analysis);
    const McSegment z = classifier.norm().standardize(McSegment::from_frames(f.mcc));
    const auto p = classify(classifier, z);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    out.push_back({e.source, e.target, classifier.domains().labels()[best]});
  }
  return out;
}

double target_accuracy(const std::vector<PredictedStimulus>& predictions) {
  if (predictions.empty()) throw Error(ErrorCode::kEmptyTable, "no predictions");
  const auto hits = std::count_if(predictions.begin(), predictions.end(),
                                  [](const PredictedStimulus& p) { return p.predicted == p.target; });
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

ScoreTable aggregate_scores(const std::vector<ResponseRecord>& responses, const StimulusIndex& index,
                            const DomainSet& domains, ResponseTask task) {
  if (task == ResponseTask::kClassify) throw Error(ErrorCode::kInvalidArgument, "score tables need mos or ess");
  ScoreTable t;
  t.task = task;
  t.labels = domains.labels();
  const std::size_t k = t.labels.size();
  std::vector<std::vector<double>> sums(k, std::vector<double>(k, 0.0));
  std::vector<double> orig_sums(k, 0.0);
  t.cells.assign(k, std::vector<ScoreCell>(k));
  t.original.assign(k, ScoreCell{});
  const auto ids = by_id(index);
  std::size_t used = 0;
  for (const auto& r : responses) {
    if (r.task != task) continue;
    validate_response(r, domains);
    const StimulusEntry& e = lookup(ids, r.stimulus_id);
    const std::size_t src = domains.find(e.source).index;
    if (e.kind == StimulusKind::kOriginal) {
      orig_sums[src] += r.score;
      ++t.original[src].count;
    } else {
      const std::size_t tgt = domains.find(e.target).index;
      sums[tgt][src] += r.score;
      ++t.cells[tgt][src].count;
    }
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::kEmptyTable, "no " + task_name(task) + " responses");
  std::vector<const ScoreCell*> conv, orig;
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t s = 0; s < k; ++s) {
      auto& c = t.cells[g][s];
      if (c.count > 0) c.mean = sums[g][s] / static_cast<double>(c.count);
      conv.push_back(&c);
    }
    auto& o = t.original[g];
    if (o.count > 0) o.mean = orig_sums[g] / static_cast<double>(o.count);
    orig.push_back(&o);
  }
  t.converted_mean = mean_of(conv);
  t.original_mean = mean_of(orig);
  return t;
}

std::string to_csv(const ConfusionTable& t) {
  std::string out;
  switch (t.layout) {
    case ConfusionTable::Layout::kOriginal:
      out = "category";
      break;
    case ConfusionTable::Layout::kSourceTarget:
      out = "source,target";
      break;
    case ConfusionTable::Layout::kTarget:
      out = "target";
      break;
  }
  for (const auto& l : t.labels) out += "," + l;
  out += ",n\n";
  for (const auto& r : t.rows) {
    switch (t.layout) {
      case ConfusionTable::Layout::kOriginal:
        out += r.source;
        break;
      case ConfusionTable::Layout::kSourceTarget:
        out += r.source + "," + r.target;
        break;
      case ConfusionTable::Layout::kTarget:
        out += r.target;
        break;
    }
    for (std::size_t c = 0; c < t.labels.size(); ++c) out += "," + (r.percent.empty() ? "" : fixed(r.percent[c], 1));
    out += "," + std::to_string(r.total) + "\n";
  }
  return out;
}

std::string to_markdown(const ConfusionTable& t) {
  std::string head, rule;
  switch (t.layout) {
    case ConfusionTable::Layout::kOriginal:
      head = "| Category |";
      rule = "|---|";
      break;
    case ConfusionTable::Layout::kSourceTarget:
      head = "| Source | Target |";
      rule = "|---|---|";
      break;
    case ConfusionTable::Layout::kTarget:
      head = "| Target |";
      rule = "|---|";
      break;
  }
  for (const auto& l : t.labels) {
    head += " " + l + " |";
    rule += "---:|";
  }
  std::string out = head + "\n" + rule + "\n";
  std::string last_source;
  for (const auto& r : t.rows) {
    switch (t.layout) {
      case ConfusionTable::Layout::kOriginal:
        out += "| " + r.source + " |";
        break;
      case ConfusionTable::Layout::kSourceTarget:
        out += "| " + (r.source == last_source ? std::string() : r.source) + " | " + r.target + " |";
        last_source = r.source;
        break;
      case ConfusionTable::Layout::kTarget:
        out += "| " + r.target + " |";
        break;
    }
    for (std::size_t c = 0; c < t.labels.size(); ++c) {
      out += " " + (r.percent.empty() ? std::string("--") : fixed(r.percent[c], 1) + "%") + " |";
    }
    out += "\n";
  }
  return out;
}

std::string to_csv(const ScoreTable& t) {
  std::string out = "target";
  for (const auto& l : t.labels) out += "," + l;
  out += ",original\n";
  for (std::size_t g = 0; g < t.labels.size(); ++g) {
    out += t.labels[g];
    for (std::size_t s = 0; s < t.labels.size(); ++s) {
      out += "," + (t.cells[g][s].mean ? fixed(*t.cells[g][s].mean, 2) : std::string());
    }
    out += "," + (t.original[g].mean ? fixed(*t.original[g].mean, 2) : std::string()) + "\n";
  }
  return out;
}

std::string to_markdown(const ScoreTable& t) {
  std::string out = "| Target |";
  std::string rule = "|---|";
  for (const auto& l : t.labels) {
    out += " " + l + " |";
    rule += "---:|";
  }
  out += " Original |\n" + rule + "---:|\n";
  for (std::size_t g = 0; g < t.labels.size(); ++g) {
    out += "| " + t.labels[g] + " |";
    for (std::size_t s = 0; s < t.labels.size(); ++s) out += " " + score_text(t.cells[g][s]) + " |";
    out += " " + score_text(t.original[g]) + " |\n";
  }
  out += "\n" + task_name(t.task) + " converted mean: " + (t.converted_mean ? fixed(*t.converted_mean, 2) : "--") +
         ", original mean: " + (t.original_mean ? fixed(*t.original_mean, 2) : "--") + "\n";
  return out;
}

nlohmann::json table_to_json(const ConfusionTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json row = {{"counts", r.counts}, {"n", r.total}};
    if (t.layout != ConfusionTable::Layout::kTarget) row["source"] = r.source;
    if (t.layout != ConfusionTable::Layout::kOriginal) row["target"] = r.target;
    if (r.percent.empty()) {
      row["percent"] = nullptr;
    } else {
      nlohmann::json pct = nlohmann::json::array();
      for (double p : r.percent) pct.push_back(round_half_up(p, 1));
      row["percent"] = pct;
    }
    rows.push_back(row);
  }
  const char* layout = t.layout == ConfusionTable::Layout::kOriginal       ? "original"
                       : t.layout == ConfusionTable::Layout::kSourceTarget ? "source_target"
                                                                           : "target";
  return {{"layout", layout}, {"labels", t.labels}, {"rows", rows}};
}

nlohmann::json table_to_json(const ScoreTable& t) {
  auto cell = [](const ScoreCell& c) -> nlohmann::json {
    return {{"n", c.count}, {"mean", c.mean ? nlohmann::json(round_half_up(*c.mean, 2)) : nlohmann::json(nullptr)}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t g = 0; g < t.labels.size(); ++g) {
    nlohmann::json sources = nlohmann::json::object();
    for (std::size_t s = 0; s < t.labels.size(); ++s) sources[t.labels[s]] = cell(t.cells[g][s]);
    rows.push_back({{"target", t.labels[g]}, {"sources", sources}, {"original", cell(t.original[g])}});
  }
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(round_half_up(*v, 2)) : nlohmann::json(nullptr);
  };
  return {{"task", task_name(t.task)},
          {"labels", t.labels},
          {"rows", rows},
          {"converted_mean", opt(t.converted_mean)},
          {"original_mean", opt(t.original_mean)}};
}

}  // namespace evc
