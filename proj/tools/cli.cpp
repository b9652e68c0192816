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

#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evc/audio.hpp"
#include "evc/checkpoint.hpp"
#include "evc/conversion.hpp"
#include "evc/corpus.hpp"
#include "evc/error.hpp"
#include "evc/evaluation.hpp"
#include "evc/listening.hpp"
#include "evc/prosody.hpp"
#include "evc/stargan.hpp"
#include "evc/training.hpp"
#include "evc/vocoder.hpp"

#ifndef EVC_VERSION
#define EVC_VERSION "0.0.0"
#endif

namespace evc::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One subcommand: its options, their defaults and the action that consumes
// the resolved settings (defaults < config file < flags).
struct Command {
  std::string name;
  CLI::App* app = nullptr;
  json defaults = json::object();
  std::set<std::string> required;
  std::map<std::string, std::string> raw;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;
  std::function<int(const json&, std::ostream&, std::ostream&)> action;

  void add(const std::string& key, json def, const std::string& help, bool is_required = false) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (def.is_boolean()) {
      flags[key] = false;
      options[key] = app->add_flag(flag, flags[key], help);
    } else {
      options[key] = app->add_option(flag, raw[key], help);
    }
    defaults[key] = std::move(def);
    if (is_required) required.insert(key);
  }
  // Keys accepted from the config file without a dedicated flag.
  void accept(const std::string& key, json def) { defaults[key] = std::move(def); }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json flag_value(const std::string& key, const json& def, const std::string& text) {
  try {
    std::size_t used = 0;
    if (def.is_number_integer() || def.is_number_unsigned()) {
      const long long v = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      if (def.is_number_unsigned() && v < 0) throw std::invalid_argument(text);
      return v;
    }
    if (def.is_number_float()) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
  } catch (const std::logic_error&) {
    throw UsageError("--" + key + ": '" + text + "' is not a number");
  }
  if (def.is_array()) return split_list(text);
  if (def.is_object()) {
    const json parsed = json::parse(text, nullptr, false);
    return parsed.is_discarded() ? json(text) : parsed;
  }
  return text;
}

json resolve(const Command& cmd, const std::optional<std::string>& seed) {
  json eff = cmd.defaults;
  if (!cmd.config_path.empty()) {
    std::ifstream in(cmd.config_path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + cmd.config_path + "'");
    json file;
    try {
      in >> file;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, cmd.config_path + ": " + e.what());
    }
    if (!file.is_object()) throw Error(ErrorCode::kConfig, cmd.config_path + ": expected a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (!eff.contains(key)) throw Error(ErrorCode::kConfig, cmd.config_path + ": unknown key '" + key + "'");
      eff[key] = value;
    }
  }
  for (const auto& [key, opt] : cmd.options) {
    if (opt->count() == 0) continue;
    const json& def = cmd.defaults.at(key);
    eff[key] = def.is_boolean() ? json(cmd.flags.at(key)) : flag_value(key, def, cmd.raw.at(key));
  }
  if (seed && eff.contains("seed")) eff["seed"] = flag_value("seed", std::uint64_t{0}, *seed);
  for (const auto& key : cmd.required) {
    if (eff.at(key).is_null()) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      throw UsageError("--" + flag + " is required (flag or config file)");
    }
  }
  return eff;
}

std::vector<std::string> list_of(const json& v) {
  if (v.is_array()) return v.get<std::vector<std::string>>();
  if (v.is_string()) return split_list(v.get<std::string>());
  throw Error(ErrorCode::kConfig, "expected a list, got " + v.dump());
}

DomainSet domains_of(const json& eff) { return DomainSet(list_of(eff.at("domains"))); }

std::string str(const json& eff, const char* key) { return eff.at(key).get<std::string>(); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

json provenance(const std::string& command, const json& eff) {
  return {{"command", command}, {"version", EVC_VERSION}, {"settings", eff}};
}

// Directory outputs get <dir>/effective-config.json; single-file outputs get
// <file>.effective-config.json next to them.
void echo_into_dir(const fs::path& dir, const std::string& command, const json& eff) {
  write_text(dir / "effective-config.json", provenance(command, eff).dump(2) + "\n");
}
void echo_beside(const fs::path& file, const std::string& command, const json& eff) {
  write_text(fs::path(file.string() + ".effective-config.json"), provenance(command, eff).dump(2) + "\n");
}

F0Method f0_method_of(const json& eff) {
  const std::string m = str(eff, "f0_method");
  if (m == "harvest") return F0Method::kHarvest;
  if (m == "dio") return F0Method::kDio;
  throw Error(ErrorCode::kConfig, "f0_method must be harvest or dio, got '" + m + "'");
}

void add_analysis_options(Command& c) {
  c.add("f0_method", "harvest", "F0 estimator: harvest or dio");
  c.add("frame_period", 5.0, "Frame shift in ms");
  c.add("f0_floor", 71.0, "Lowest F0 searched, Hz");
  c.add("f0_ceil", 800.0, "Highest F0 searched, Hz");
  c.add("sample_rate", 16000, "Expected input sample rate");
  c.add("resample", false, "Resample input at other rates instead of refusing it");
}

AnalysisOptions analysis_of(const json& eff, int num_mcc) {
  AnalysisOptions a;
  a.frame_period = eff.at("frame_period").get<double>();
  a.f0_floor = eff.at("f0_floor").get<double>();
  a.f0_ceil = eff.at("f0_ceil").get<double>();
  a.f0_method = f0_method_of(eff);
  a.expected_sample_rate = eff.at("sample_rate").get<int>();
  a.resample = eff.at("resample").get<bool>();
  a.num_mcc = num_mcc;
  if (eff.contains("warp")) a.warp = eff.at("warp").get<double>();
  return a;
}

json default_domains() { return DomainSet::defaults().labels(); }

// Resolves a preset name (or {"preset": name}) against the data's Q and the domain count.
ArchConfig arch_of(const json& spec, int q, int k) {
  if (spec.is_string()) return ArchConfig::preset(spec.get<std::string>(), q, k);
  json full = spec;
  if (full.is_object() && full.contains("preset")) {
    if (!full.contains("q")) full["q"] = q;
    if (!full.contains("k")) full["k"] = k;
  }
  return full.get<ArchConfig>();
}

// corpus scan --------------------------------------------------------------

int corpus_scan(const json& eff, std::ostream& out, std::ostream& err) {
  ScanOptions opt;
  opt.domains = domains_of(eff);
  opt.rule.pattern = str(eff, "pattern");
  opt.rule.emotion_group = eff.at("emotion_group").get<int>();
  opt.rule.phrase_group = eff.at("phrase_group").get<int>();
  opt.expected_sample_rate = eff.at("sample_rate").get<int>();
  opt.expected_bit_depth = eff.at("bit_depth").get<int>();
  opt.allow_resample = eff.at("resample").get<bool>();
  const ScanResult r = scan_corpus(str(eff, "root"), opt);
  for (const auto& e : r.errors) err << "warning: " << e.path << ": " << e.message << "\n";
  const fs::path path = str(eff, "out");
  write_manifest(path, r.refs);
  echo_beside(path, "corpus scan", eff);
  out << "scanned " << r.refs.size() << " utterances (" << r.errors.size() << " unreadable, " << r.skipped
      << " outside the domain set) -> " << path.string() << "\n";
  return kExitOk;
}

// corpus split -------------------------------------------------------------

int corpus_split(const json& eff, std::ostream& out, std::ostream&) {
  const Manifest refs = read_manifest(str(eff, "manifest"), domains_of(eff));
  SplitSpec spec;
  const auto test = list_of(eff.at("test_phrases"));
  spec.test_phrase_ids = {test.begin(), test.end()};
  if (!eff.at("train_phrases").is_null()) {
    const auto train = list_of(eff.at("train_phrases"));
    spec.train_phrase_ids = std::set<std::string>(train.begin(), train.end());
  }
  const Split s = make_split(refs, spec);
  write_manifest(str(eff, "train_out"), s.train);
  write_manifest(str(eff, "test_out"), s.test);
  echo_beside(str(eff, "train_out"), "corpus split", eff);
  out << "split " << refs.size() << " utterances: " << s.train.size() << " train, " << s.test.size() << " test\n";
  return kExitOk;
}

// features extract ---------------------------------------------------------

int features_extract(const json& eff, std::ostream& out, std::ostream& err) {
  const Manifest refs = read_manifest(str(eff, "manifest"), domains_of(eff));
  const AnalysisOptions a = analysis_of(eff, eff.at("num_mcc").get<int>());
  const auto backend = make_backend(a.f0_method);
  const fs::path dir = str(eff, "out_dir");
  fs::create_directories(dir);
  std::size_t failed = 0;
  std::optional<Error> first;
  for (const auto& ref : refs) {
    try {
      const Waveform w = read_wav(ref.audio_path);
      write_feature_cache(dir / feature_cache_name(ref.id), analyze(*backend, w.samples, w.sample_rate, a));
    } catch (const Error& e) {
      err << "error: " << ref.id << ": " << e.what() << "\n";
      if (!first) first = e;
      ++failed;
    }
  }
  echo_into_dir(dir, "features extract", eff);
  out << "extracted " << refs.size() - failed << " of " << refs.size() << " utterances -> " << dir.string() << "\n";
  if (first) throw Error(first->code(), std::to_string(failed) + " utterances failed; first: " + first->what());
  return kExitOk;
}

// prosody fit / apply ------------------------------------------------------

int prosody_fit(const json& eff, std::ostream& out, std::ostream&) {
  const DomainSet domains = domains_of(eff);
  const Manifest refs = read_manifest(str(eff, "manifest"), domains);
  const fs::path cache = str(eff, "cache_dir");
  std::map<std::string, std::vector<std::vector<double>>> f0;
  for (const auto& ref : refs) {
    f0[ref.emotion.label].push_back(read_feature_cache(cache / feature_cache_name(ref.id)).f0);
  }
  F0StatsTable table;
  for (const auto& d : domains.domains()) {
    auto it = f0.find(d.label);
    if (it == f0.end()) throw Error(ErrorCode::kInsufficientData, "no utterances for domain '" + d.label + "'");
    table[d.label] = estimate_f0_stats(std::span<const std::vector<double>>(it->second), d);
  }
  const fs::path path = str(eff, "out");
  write_f0_stats(path, table);
  echo_beside(path, "prosody fit", eff);
  for (const auto& [label, s] : table) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s mu=%.5f sigma=%.5f frames=%zu\n", label.c_str(), s.mu, s.sigma,
                  s.n_frames);
    out << line;
  }
  return kExitOk;
}

int prosody_apply(const json& eff, std::ostream& out, std::ostream&) {
  const DomainSet domains = domains_of(eff);
  const F0StatsTable stats = read_f0_stats(str(eff, "stats"), domains);
  const auto& src = stats.at(domains.find(str(eff, "source")).label);
  const auto& tgt = stats.at(domains.find(str(eff, "target")).label);
  const fs::path in = str(eff, "input");
  const fs::path dst = str(eff, "output");
  std::string ext = in.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".wav") {
    const AnalysisOptions a = analysis_of(eff, eff.at("num_mcc").get<int>());
    const auto backend = make_backend(a.f0_method);
    const Waveform w = read_wav(in);
    FeatureSequence f = analyze(*backend, w.samples, w.sample_rate, a);
    f.f0 = convert_f0(f.f0, src, tgt);
    Waveform y;
    y.samples = synthesize(*backend, f);
    y.samples.resize(w.sample_rate == f.sample_rate
                         ? w.samples.size()
                         : static_cast<std::size_t>(std::llround(double(w.samples.size()) * f.sample_rate / w.sample_rate)),
                     0.0);
    y.sample_rate = f.sample_rate;
    peak_normalize(y.samples, -1.0);
    write_wav(dst, y);
  } else {
    FeatureSequence f = read_feature_cache(in);
    f.f0 = convert_f0(f.f0, src, tgt);
    write_feature_cache(dst, f);
  }
  out << "F0 " << src.domain.label << " -> " << tgt.domain.label << ": " << dst.string() << "\n";
  return kExitOk;
}

// train ----------------------------------------------------------------------

std::vector<TrainingUtterance> training_data(const json& eff, const DomainSet& domains) {
  const Manifest refs = read_manifest(str(eff, "manifest"), domains);
  auto data = load_training_set(refs, str(eff, "cache_dir"), domains);
  if (data.empty()) throw Error(ErrorCode::kEmptyCorpus, "training manifest is empty");
  return data;
}

int train(const json& eff, std::ostream& out, std::ostream&) {
  const DomainSet domains = domains_of(eff);
  auto data = training_data(eff, domains);
  TrainConfig cfg;
  json tc = json::object();
  for (const auto& key : {"batch_size", "epochs", "adam_g", "adam_c", "adam_d", "loss_weights", "rho",
                          "id_anneal_iterations", "segment_len", "seed", "checkpoint_every", "steps"}) {
    tc[key] = eff.at(key);
  }
  from_json(tc, cfg);
  cfg.arch = arch_of(eff.at("arch"), data.front().x.q(), static_cast<int>(domains.size()));

  const fs::path dir = str(eff, "out_dir");
  fs::create_directories(dir);
  json echoed = eff;
  echoed["train_config"] = cfg;
  echo_into_dir(dir, "train", echoed);

  Trainer trainer = eff.at("resume").is_null() ? Trainer(cfg, domains, std::move(data))
                                               : Trainer::resume(str(eff, "resume"), cfg, std::move(data));
  trainer.set_output_dir(dir);
  const int every = std::max(1, eff.at("log_every").get<int>());
  int last_epoch = -1;
  trainer.set_progress([&](const MetricsRow& r) {
    if (r.epoch == last_epoch || (r.epoch + 1) % every != 0) return;
    last_epoch = r.epoch;
    char line[200];
    std::snprintf(line, sizeof line, "epoch %d iter %lld  D %.4f  C %.4f  G %.4f  cyc %.3f  id %.3f\n", r.epoch + 1,
                  r.iteration, r.loss_adv_d, r.loss_cls_c, r.loss_adv_g, r.loss_cyc, r.loss_id);
    out << line << std::flush;
  });
  trainer.run();
  out << "trained " << trainer.epoch() << " epochs (" << trainer.iteration() << " iterations) -> "
      << (dir / "model.evcm").string() << "\n";
  return kExitOk;
}

int train_classifier_cmd(const json& eff, std::ostream& out, std::ostream&) {
  const DomainSet domains = domains_of(eff);
  const auto data = training_data(eff, domains);
  ClassifierConfig cfg;
  from_json(json{{"batch_size", eff.at("batch_size")},
                 {"epochs", eff.at("epochs")},
                 {"adam", eff.at("adam")},
                 {"segment_len", eff.at("segment_len")},
                 {"seed", eff.at("seed")}},
            cfg);
  cfg.arch = arch_of(eff.at("arch"), data.front().x.q(), static_cast<int>(domains.size()));
  const ModelBundle judge = train_classifier(cfg, domains, data);
  const fs::path path = str(eff, "out");
  save_model(path, judge);
  json echoed = eff;
  echoed["classifier_config"] = cfg;
  echo_beside(path, "eval train-classifier", echoed);
  out << "trained classifier on " << data.size() << " utterances -> " << path.string() << "\n";
  return kExitOk;
}

// convert --------------------------------------------------------------------

int convert(const json& eff, std::ostream& out, std::ostream& err) {
  const ModelBundle model = load_model(str(eff, "model"));
  const DomainSet& domains = model.domains();
  const F0StatsTable stats = read_f0_stats(str(eff, "stats"), domains);
  const Manifest refs = read_manifest(str(eff, "manifest"), domains);
  std::vector<EmotionDomain> targets;
  const auto labels = eff.at("targets").is_null() ? domains.labels() : list_of(eff.at("targets"));
  for (const auto& l : labels) targets.push_back(domains.find(l));

  ConversionOptions opt;
  opt.analysis = analysis_of(eff, model.q());
  opt.normalize = !eff.at("raw_gain").get<bool>();
  opt.peak_dbfs = eff.at("peak_dbfs").get<double>();
  opt.pass_through_c0 = eff.at("pass_through_c0").get<bool>();
  const auto backend = make_backend(opt.analysis.f0_method);
  const fs::path dir = str(eff, "out_dir");
  const BatchResult r =
      convert_batch(*backend, refs, targets, model, stats, dir, opt, !eff.at("no_originals").get<bool>());
  echo_into_dir(dir, "convert", eff);
  for (const auto& f : r.failures) err << "error: " << f.utterance_id << " -> " << f.target << ": " << f.message << "\n";
  out << "wrote " << r.index.size() << " stimuli -> " << (dir / "index.jsonl").string() << "\n";
  if (!r.failures.empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::to_string(r.failures.size()) + " conversions failed");
  }
  return kExitOk;
}

// eval -----------------------------------------------------------------------

void write_table(const fs::path& stem, const ConfusionTable& t) {
  write_text(stem.string() + ".csv", to_csv(t));
  write_text(stem.string() + ".md", to_markdown(t));
  write_text(stem.string() + ".json", table_to_json(t).dump(2) + "\n");
}

int eval_objective(const json& eff, std::ostream& out, std::ostream&) {
  const fs::path index_path = str(eff, "index");
  const StimulusIndex index = read_stimulus_index(index_path);
  const fs::path dir = str(eff, "out_dir");
  fs::create_directories(dir);

  std::vector<std::pair<std::string, std::string>> judges = {{"training", str(eff, "model")}};
  if (!eff.at("classifier").is_null()) judges.emplace_back("independent", str(eff, "classifier"));
  json summary = json::object();
  for (const auto& [name, path] : judges) {
    const ModelBundle judge = load_model(path);
    const AnalysisOptions a = analysis_of(eff, judge.q());
    const auto backend = make_backend(a.f0_method);
    const auto predictions = classify_stimuli(index, index_path.parent_path(), judge, *backend, a);
    const ConfusionTable table = objective_confusion(predictions, judge.domains());
    const ConfusionTable averaged = average_over_sources(table);
    write_table(dir / ("objective-" + name), table);
    write_table(dir / ("objective-" + name + "-averaged"), averaged);
    const double acc = target_accuracy(predictions);
    summary[name] = {{"model", path},
                     {"conversions", predictions.size()},
                     {"target_accuracy", acc},
                     {"chance", 1.0 / static_cast<double>(judge.domains().size())}};
    out << name << " classifier: " << predictions.size() << " conversions, target accuracy "
        << round_half_up(100.0 * acc, 1) << "%\n"
        << to_markdown(averaged);
  }
  write_text(dir / "objective-summary.json", summary.dump(2) + "\n");
  echo_into_dir(dir, "eval objective", eff);
  return kExitOk;
}

int eval_aggregate(const json& eff, std::ostream& out, std::ostream&) {
  const DomainSet domains = domains_of(eff);
  const auto responses = read_responses(str(eff, "responses"), domains);
  const StimulusIndex index = read_stimulus_index(str(eff, "index"));
  const ResponseTask task = parse_task(str(eff, "task"));
  const std::string dir = eff.at("out_dir").is_null() ? std::string() : str(eff, "out_dir");
  if (task == ResponseTask::kClassify) {
    const ClassificationTables t = aggregate_classification(responses, index, domains);
    out << "original\n" << to_markdown(t.original) << "\nconverted\n" << to_markdown(t.converted)
        << "\naveraged over sources\n" << to_markdown(t.averaged);
    if (!dir.empty()) {
      write_table(fs::path(dir) / "classify-original", t.original);
      write_table(fs::path(dir) / "classify-converted", t.converted);
      write_table(fs::path(dir) / "classify-averaged", t.averaged);
    }
  } else {
    const ScoreTable t = aggregate_scores(responses, index, domains, task);
    out << to_markdown(t);
    if (!dir.empty()) {
      const fs::path stem = fs::path(dir) / task_name(task);
      write_text(stem.string() + ".csv", to_csv(t));
      write_text(stem.string() + ".md", to_markdown(t));
      write_text(stem.string() + ".json", table_to_json(t).dump(2) + "\n");
    }
  }
  if (!dir.empty()) echo_into_dir(dir, "eval aggregate", eff);
  return kExitOk;
}

// serve ----------------------------------------------------------------------

int serve(const json& eff, std::ostream& out, std::ostream&) {
  const fs::path index_path = str(eff, "index");
  ListeningService service(read_stimulus_index(index_path), index_path.parent_path(), str(eff, "responses"),
                           domains_of(eff), eff.at("seed").get<std::uint64_t>());
  ListeningServer server(service);
  const std::string host = str(eff, "host");
  const int port = eff.at("port").get<int>();
  out << "serving " << service.index().size() << " stimuli on http://" << host << ":" << port << "\n" << std::flush;
  server.listen(host, port);
  return kExitOk;
}

void report(std::ostream& err, bool as_json, const std::string& code, const std::string& message,
            const std::string& command) {
  if (as_json) {
    err << json{{"error", code}, {"message", message}, {"command", command}}.dump() << "\n";
  } else {
    err << "evc: " << (command.empty() ? "" : command + ": ") << message << "\n";
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Emotional voice conversion with StarGAN", "evc");
  app.set_version_flag("--version", "evc " EVC_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  bool error_json = false;
  std::string seed_text;
  app.add_flag("--error-json", error_json, "Report failures as one JSON object on stderr");
  CLI::Option* seed_opt = app.add_option("--seed", seed_text, "Seed for every random choice");

  std::vector<std::unique_ptr<Command>> commands;
  auto make = [&](CLI::App* parent, const std::string& name, const std::string& label, const std::string& help) {
    auto c = std::make_unique<Command>();
    c->name = label;
    c->app = parent->add_subcommand(name, help);
    c->app->add_option("--config", c->config_path, "JSON file with settings; flags take precedence");
    commands.push_back(std::move(c));
    return commands.back().get();
  };

  CLI::App* corpus = app.add_subcommand("corpus", "Corpus manifests")->require_subcommand(1);
  CLI::App* features = app.add_subcommand("features", "Vocoder features")->require_subcommand(1);
  CLI::App* prosody = app.add_subcommand("prosody", "F0 statistics")->require_subcommand(1);
  CLI::App* eval = app.add_subcommand("eval", "Objective and listening-test evaluation")->require_subcommand(1);

  Command* c = make(corpus, "scan", "corpus scan", "Scan a corpus tree into a manifest");
  c->add("root", nullptr, "Corpus root directory", true);
  c->add("out", nullptr, "Manifest to write (JSON lines)", true);
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->add("pattern", LabelRule{}.pattern, "Regex over the relative path");
  c->add("emotion_group", 1, "Capture group holding the emotion");
  c->add("phrase_group", 2, "Capture group holding the phrase id");
  c->add("sample_rate", 16000, "Expected sample rate");
  c->add("bit_depth", 16, "Expected bit depth");
  c->add("resample", false, "Accept other sample rates");
  c->action = corpus_scan;

  c = make(corpus, "split", "corpus split", "Split a manifest by phrase");
  c->add("manifest", nullptr, "Input manifest", true);
  c->add("train_out", nullptr, "Training manifest to write", true);
  c->add("test_out", nullptr, "Test manifest to write", true);
  c->add("test_phrases", json::array({"amamizuwa", "midori", "nami"}), "Held-out phrase ids");
  c->add("train_phrases", json::array(), "Training phrase ids (default: all others)");
  c->defaults["train_phrases"] = nullptr;
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->action = corpus_split;

  c = make(features, "extract", "features extract", "Analyze every manifest entry into a feature cache");
  c->add("manifest", nullptr, "Input manifest", true);
  c->add("out_dir", nullptr, "Cache directory", true);
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->add("num_mcc", 36, "Mel-cepstral coefficients per frame");
  c->add("warp", 0.42, "All-pass warping constant");
  add_analysis_options(*c);
  c->action = features_extract;

  c = make(prosody, "fit", "prosody fit", "Estimate per-domain log-F0 statistics");
  c->add("manifest", nullptr, "Training manifest", true);
  c->add("cache_dir", nullptr, "Feature cache directory", true);
  c->add("out", nullptr, "Statistics JSON to write", true);
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->action = prosody_fit;

  c = make(prosody, "apply", "prosody apply", "Convert the F0 of one WAV or feature cache");
  c->add("input", nullptr, "WAV or feature cache", true);
  c->add("output", nullptr, "Output of the same kind", true);
  c->add("stats", nullptr, "Statistics JSON", true);
  c->add("source", nullptr, "Source emotion", true);
  c->add("target", nullptr, "Target emotion", true);
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->add("num_mcc", 36, "Mel-cepstral coefficients per frame (WAV input)");
  add_analysis_options(*c);
  c->action = prosody_apply;

  c = make(&app, "train", "train", "Train the generator, discriminator and classifier");
  c->add("manifest", nullptr, "Training manifest", true);
  c->add("cache_dir", nullptr, "Feature cache directory", true);
  c->add("out_dir", nullptr, "Model, checkpoints and metrics.csv", true);
  c->add("resume", "", "Checkpoint to continue from");
  c->defaults["resume"] = nullptr;
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->add("arch", json::object(), "Architecture preset (reference, compact) or JSON");
  c->defaults["arch"] = "reference";
  {
    const json d = TrainConfig{};
    c->add("epochs", d.at("epochs"), "Training epochs");
    c->add("batch_size", d.at("batch_size"), "Utterances per iteration");
    c->add("segment_len", d.at("segment_len"), "Frames per training segment");
    c->add("rho", d.at("rho"), "Exponent of the cycle and identity norms");
    c->add("checkpoint_every", d.at("checkpoint_every"), "Epochs between checkpoints (0: final only)");
    c->add("id_anneal_iterations", d.at("id_anneal_iterations"), "Iteration at which lambda_id drops to 0");
    c->add("seed", d.at("seed"), "Training seed");
    for (const auto& key : {"adam_g", "adam_c", "adam_d", "loss_weights", "steps"}) c->accept(key, d.at(key));
  }
  c->add("log_every", 10, "Epochs between progress lines");
  c->action = train;

  c = make(&app, "convert", "convert", "Convert a manifest into stimuli and an index");
  c->add("model", nullptr, "Trained model", true);
  c->add("stats", nullptr, "F0 statistics JSON", true);
  c->add("manifest", nullptr, "Utterances to convert", true);
  c->add("out_dir", nullptr, "Output directory", true);
  c->add("targets", json::array(), "Comma-separated target emotions (default: all)");
  c->defaults["targets"] = nullptr;
  c->add("no_originals", false, "Do not copy the unconverted utterances");
  c->add("raw_gain", false, "Keep the synthesis gain instead of peak-normalizing");
  c->add("peak_dbfs", -1.0, "Peak level after normalization");
  c->add("pass_through_c0", false, "Keep the source energy coefficient");
  add_analysis_options(*c);
  c->action = convert;

  c = make(eval, "objective", "eval objective", "Classify converted stimuli with a trained classifier");
  c->add("index", nullptr, "Stimulus index", true);
  c->add("model", nullptr, "Model whose training classifier judges", true);
  c->add("classifier", "", "Independently trained classifier model");
  c->defaults["classifier"] = nullptr;
  c->add("out_dir", nullptr, "Directory for tables", true);
  add_analysis_options(*c);
  c->action = eval_objective;

  c = make(eval, "aggregate", "eval aggregate", "Tabulate listening-test responses");
  c->add("responses", nullptr, "Response log (JSON lines)", true);
  c->add("index", nullptr, "Stimulus index", true);
  c->add("task", "classify", "classify, mos or ess");
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->add("out_dir", "", "Directory for CSV, Markdown and JSON tables");
  c->defaults["out_dir"] = nullptr;
  c->action = eval_aggregate;

  c = make(eval, "train-classifier", "eval train-classifier", "Train a stand-alone domain classifier");
  c->add("manifest", nullptr, "Training manifest", true);
  c->add("cache_dir", nullptr, "Feature cache directory", true);
  c->add("out", nullptr, "Model file to write", true);
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->add("arch", json::object(), "Architecture preset or JSON");
  c->defaults["arch"] = "reference";
  {
    const json d = ClassifierConfig{};
    c->add("epochs", d.at("epochs"), "Training epochs");
    c->add("batch_size", d.at("batch_size"), "Segments per step");
    c->add("segment_len", d.at("segment_len"), "Frames per segment");
    c->add("seed", d.at("seed"), "Seed");
    c->accept("adam", d.at("adam"));
  }
  c->action = train_classifier_cmd;

  c = make(&app, "serve", "serve", "Serve stimuli and collect listening-test responses");
  c->add("index", nullptr, "Stimulus index", true);
  c->add("responses", nullptr, "Response log to append to", true);
  c->add("domains", default_domains(), "Comma-separated emotion labels");
  c->add("host", "127.0.0.1", "Bind address");
  c->add("port", 8080, "Port");
  c->add("seed", 0, "Seed of the per-participant presentation order");
  c->action = serve;

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report(err, error_json, "usage", e.what(), "");
    if (!error_json) err << "run 'evc --help' for usage\n";
    return kExitUsage;
  }

  Command* chosen = nullptr;
  for (const auto& cmd : commands) {
    if (cmd->app->parsed()) chosen = cmd.get();
  }
  if (!chosen) {
    report(err, error_json, "usage", "no command given", "");
    return kExitUsage;
  }
  try {
    const std::optional<std::string> seed = seed_opt->count() ? std::optional(seed_text) : std::nullopt;
    return chosen->action(resolve(*chosen, seed), out, err);
  } catch (const UsageError& e) {
    report(err, error_json, "usage", e.what(), chosen->name);
    return kExitUsage;
  } catch (const Error& e) {
    report(err, error_json, std::string(error_code_name(e.code())), e.what(), chosen->name);
    return kExitFailure;
  } catch (const json::exception& e) {
    report(err, error_json, "config", e.what(), chosen->name);
    return kExitFailure;
  } catch (const std::exception& e) {
    report(err, error_json, "internal", e.what(), chosen->name);
    return kExitFailure;
  }
}

}  // namespace evc::cli
