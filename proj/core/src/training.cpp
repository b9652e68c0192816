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

#include "evc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "evc/error.hpp"
#include "evc/vocoder.hpp"
#include "io_util.hpp"

namespace evc {
namespace {

constexpr std::uint64_t kStreamSalt = 0x5851f42d4c957f2dULL;

void check_adam(const AdamSettings& a, const char* name) {
  if (!(a.alpha > 0.0) || !(a.beta1 >= 0.0 && a.beta1 < 1.0)) {
    throw Error(ErrorCode::kConfig, std::string(name) + ": need alpha > 0 and 0 <= beta1 < 1");
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw Error(ErrorCode::kIntegrity, "checkpoint RNG state is unreadable");
}

void pack_adam(std::vector<NamedTensor>& out, const std::string& name, const nn::AdamState& s) {
  out.push_back({name + ".m", s.m});
  out.push_back({name + ".v", s.v});
}

nn::AdamState unpack_adam(const Checkpoint& ck, const std::string& name, long long step, std::size_t n) {
  nn::AdamState s;
  s.step = step;
  const auto* m = ck.find_extra(name + ".m");
  const auto* v = ck.find_extra(name + ".v");
  if (!m || !v) throw Error(ErrorCode::kIntegrity, "checkpoint lacks optimizer state '" + name + "'");
  if (!m->empty() && (m->size() != n || v->size() != n)) {
    throw Error(ErrorCode::kConfigMismatch, "optimizer state '" + name + "' has the wrong size");
  }
  s.m = *m;
  s.v = *v;
  return s;
}

std::vector<McSegment> raw_segments(const std::vector<TrainingUtterance>& data) {
  std::vector<McSegment> out;
  out.reserve(data.size());
  for (const auto& u : data) out.push_back(u.x);
  return out;
}

void check_domains_covered(const std::vector<TrainingUtterance>& data, const DomainSet& domains) {
  std::vector<int> counts(domains.size(), 0);
  for (const auto& u : data) {
    if (u.domain >= domains.size()) {
      throw Error(ErrorCode::kConfig, "utterance '" + u.id + "' has a domain index outside the set");
    }
    ++counts[u.domain];
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) {
      throw Error(ErrorCode::kConfig, "domain '" + domains.labels()[k] + "' has no training utterances");
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void to_json(nlohmann::json& j, const AdamSettings& a) { j = {{"alpha", a.alpha}, {"beta1", a.beta1}}; }

void from_json(const nlohmann::json& j, AdamSettings& a) {
  a.alpha = j.value("alpha", a.alpha);
  a.beta1 = j.value("beta1", a.beta1);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (epochs < 0) throw Error(ErrorCode::kConfig, "epochs must be >= 0");
  if (segment_len < 1) throw Error(ErrorCode::kConfig, "segment_len must be >= 1");
  if (checkpoint_every < 0) throw Error(ErrorCode::kConfig, "checkpoint_every must be >= 0");
  if (id_anneal_iterations < 0) throw Error(ErrorCode::kConfig, "id_anneal_iterations must be >= 0");
  if (steps_d < 1 || steps_c < 1 || steps_g < 1) throw Error(ErrorCode::kConfig, "step counts must be >= 1");
  if (!(rho > 0.0)) throw Error(ErrorCode::kConfig, "rho must be positive");
  check_adam(adam_g, "adam_g");
  check_adam(adam_c, "adam_c");
  check_adam(adam_d, "adam_d");
  loss_weights.validate();
  arch.validate();
  if (segment_len % arch.time_multiple() != 0) {
    throw Error(ErrorCode::kConfig, "segment_len must be a multiple of " + std::to_string(arch.time_multiple()));
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"arch", c.arch},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"adam_g", c.adam_g},
       {"adam_c", c.adam_c},
       {"adam_d", c.adam_d},
       {"loss_weights",
        {{"lambda_cls", c.loss_weights.lambda_cls},
         {"lambda_cyc", c.loss_weights.lambda_cyc},
         {"lambda_id", c.loss_weights.lambda_id}}},
       {"rho", c.rho},
       {"id_anneal_iterations", c.id_anneal_iterations},
       {"segment_len", c.segment_len},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"steps", {{"d", c.steps_d}, {"c", c.steps_c}, {"g", c.steps_g}}}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("arch")) j.at("arch").get_to(c.arch);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("adam_g")) j.at("adam_g").get_to(c.adam_g);
  if (j.contains("adam_c")) j.at("adam_c").get_to(c.adam_c);
  if (j.contains("adam_d")) j.at("adam_d").get_to(c.adam_d);
  if (j.contains("loss_weights")) {
    const auto& w = j.at("loss_weights");
    c.loss_weights.lambda_cls = w.value("lambda_cls", c.loss_weights.lambda_cls);
    c.loss_weights.lambda_cyc = w.value("lambda_cyc", c.loss_weights.lambda_cyc);
    c.loss_weights.lambda_id = w.value("lambda_id", c.loss_weights.lambda_id);
  }
  c.rho = j.value("rho", c.rho);
  c.id_anneal_iterations = j.value("id_anneal_iterations", c.id_anneal_iterations);
  c.segment_len = j.value("segment_len", c.segment_len);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("steps")) {
    const auto& s = j.at("steps");
    c.steps_d = s.value("d", c.steps_d);
    c.steps_c = s.value("c", c.steps_c);
    c.steps_g = s.value("g", c.steps_g);
  }
}

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = {{"arch", c.arch},           {"batch_size", c.batch_size}, {"epochs", c.epochs},
       {"adam", c.adam},           {"segment_len", c.segment_len}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  if (j.contains("arch")) j.at("arch").get_to(c.arch);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("adam")) j.at("adam").get_to(c.adam);
  c.segment_len = j.value("segment_len", c.segment_len);
  c.seed = j.value("seed", c.seed);
}

std::vector<TrainingUtterance> load_training_set(const Manifest& manifest,
                                                 const std::filesystem::path& cache_dir,
                                                 const DomainSet& domains,
                                                 const std::optional<std::string>& backend) {
  std::vector<TrainingUtterance> out;
  out.reserve(manifest.size());
  for (const auto& ref : manifest) {
    const auto path = cache_dir / feature_cache_name(ref.id);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kIo, "feature cache missing for '" + ref.id + "': " + path.string());
    }
    FeatureSequence f = read_feature_cache(path, backend);
    out.push_back({ref.id, McSegment::from_frames(f.mcc), domains.find(ref.emotion.label).index});
  }
  return out;
}

std::string metrics_csv_header() {
  return "iteration,epoch,loss_adv_d,loss_cls_c,loss_adv_g,loss_cls_g,loss_cyc,loss_id,objective_g\n";
}

std::string metrics_csv_row(const MetricsRow& r) {
  return std::to_string(r.iteration) + "," + std::to_string(r.epoch) + "," + fmt(r.loss_adv_d) + "," +
         fmt(r.loss_cls_c) + "," + fmt(r.loss_adv_g) + "," + fmt(r.loss_cls_g) + "," + fmt(r.loss_cyc) +
         "," + fmt(r.loss_id) + "," + fmt(r.objective_g) + "\n";
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text_file(path));
  std::string line;
  std::vector<MetricsRow> rows;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    if (std::sscanf(line.c_str(), "%lld,%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.iteration, &r.epoch,
                    &r.loss_adv_d, &r.loss_cls_c, &r.loss_adv_g, &r.loss_cls_g, &r.loss_cyc, &r.loss_id,
                    &r.objective_g) != 9) {
      throw Error(ErrorCode::kDecode, "malformed metrics row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

std::size_t draw_target_domain(std::mt19937_64& rng, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "no domains to draw from");
  return std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
}

McSegment random_crop(const McSegment& x, int length, std::mt19937_64& rng) {
  if (length < 1) throw Error(ErrorCode::kInvalidArgument, "crop length must be >= 1");
  if (x.n() >= length) {
    const int start = std::uniform_int_distribution<int>(0, x.n() - length)(rng);
    return McSegment(x.values().middleCols(start, length));
  }
  RowMatrix padded = RowMatrix::Zero(x.q(), length);
  padded.leftCols(x.n()) = x.values();
  return McSegment(std::move(padded));
}

Trainer::Trainer(TrainConfig cfg, DomainSet domains, std::vector<TrainingUtterance> data)
    : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  if (domains.size() != static_cast<std::size_t>(cfg_.arch.k)) {
    throw Error(ErrorCode::kConfigMismatch, "architecture K differs from the domain count");
  }
  if (data_.empty()) throw Error(ErrorCode::kConfig, "no training utterances");
  check_domains_covered(data_, domains);
  const auto raw = raw_segments(data_);
  model_ = ModelBundle(cfg_.arch, std::move(domains), FeatureNorm::fit(raw));
  model_.initialize(cfg_.seed);
  rng_.seed(cfg_.seed ^ kStreamSalt);
  check_data();
  prepare_data();
}

Trainer Trainer::resume(const std::filesystem::path& path, std::optional<TrainConfig> cfg,
                        std::vector<TrainingUtterance> data) {
  Checkpoint ck = load_checkpoint(path);
  if (!ck.state.is_object() || ck.state.value("kind", std::string()) != "trainer") {
    throw Error(ErrorCode::kConfig, "checkpoint holds no training state: " + path.string());
  }
  Trainer t;
  TrainConfig stored = ck.state.at("config").get<TrainConfig>();
  if (cfg) {
    if (!(cfg->arch == ck.model.arch())) {
      throw Error(ErrorCode::kConfigMismatch,
                  "architecture " + cfg->arch.fingerprint() + " (Q=" + std::to_string(cfg->arch.q) +
                      ") differs from checkpoint " + ck.model.arch().fingerprint() +
                      " (Q=" + std::to_string(ck.model.q()) + ")");
    }
    stored = *cfg;
  }
  stored.validate();
  t.cfg_ = stored;
  t.data_ = std::move(data);
  if (t.data_.empty()) throw Error(ErrorCode::kConfig, "no training utterances");
  t.model_ = std::move(ck.model);
  check_domains_covered(t.data_, t.model_.domains());
  t.epoch_ = ck.state.at("epoch").get<int>();
  t.iteration_ = ck.state.at("iteration").get<long long>();
  restore_rng(t.rng_, ck.state.at("rng").get<std::string>());
  const auto& steps = ck.state.at("adam_steps");
  t.adam_g_ = unpack_adam(ck, "adam_g", steps.at("g").get<long long>(), t.model_.gen_params.size());
  t.adam_d_ = unpack_adam(ck, "adam_d", steps.at("d").get<long long>(), t.model_.disc_params.size());
  t.adam_c_ = unpack_adam(ck, "adam_c", steps.at("c").get<long long>(), t.model_.cls_params.size());
  t.check_data();
  t.prepare_data();
  return t;
}

void Trainer::check_data() const {
  for (const auto& u : data_) {
    if (u.x.q() != model_.q()) {
      throw Error(ErrorCode::kConfigMismatch, "utterance '" + u.id + "' has Q=" + std::to_string(u.x.q()) +
                                                  ", model has Q=" + std::to_string(model_.q()));
    }
  }
}

void Trainer::prepare_data() {
  standardized_.clear();
  standardized_.reserve(data_.size());
  for (const auto& u : data_) standardized_.push_back(model_.norm().standardize(u.x));
}

void Trainer::set_output_dir(std::filesystem::path dir) { out_dir_ = std::move(dir); }

void Trainer::set_progress(std::function<void(const MetricsRow&)> callback) { progress_ = std::move(callback); }

std::vector<TrainingSample> Trainer::make_batch(std::span<const std::size_t> indices) {
  const std::size_t k = static_cast<std::size_t>(model_.k());
  std::vector<TrainingSample> batch;
  batch.reserve(indices.size());
  for (std::size_t i : indices) {
    McSegment x = random_crop(standardized_[i], cfg_.segment_len, rng_);
    const std::size_t target = draw_target_domain(rng_, k);
    batch.push_back({std::move(x), DomainCode(data_[i].domain, k), DomainCode(target, k)});
  }
  return batch;
}

void Trainer::fail_non_finite(const std::string& what) const {
  std::string where = "no output directory set";
  if (out_dir_) {
    std::filesystem::create_directories(*out_dir_);
    const auto path = *out_dir_ / "diagnostic.evcm";
    save(path);
    where = "state saved to " + path.string();
  }
  throw Error(ErrorCode::kNonFinite, what + " became non-finite at iteration " + std::to_string(iteration_) +
                                         "; " + where);
}

MetricsRow Trainer::step(std::span<const std::size_t> indices) {
  const auto batch = make_batch(indices);
  MetricsRow row;
  row.iteration = iteration_;
  row.epoch = epoch_;

  for (int s = 0; s < cfg_.steps_d; ++s) {
    auto d = objective_d(model_, batch, true);
    if (!std::isfinite(d.value) || !all_finite(d.grad)) fail_non_finite("discriminator objective");
    if (s == 0) row.loss_adv_d = d.value;
    nn::adam_update(model_.disc_params, d.grad, adam_d_, cfg_.adam_d.config());
  }
  for (int s = 0; s < cfg_.steps_c; ++s) {
    auto c = objective_c(model_, batch, true);
    if (!std::isfinite(c.value) || !all_finite(c.grad)) fail_non_finite("classifier objective");
    if (s == 0) row.loss_cls_c = c.value;
    nn::adam_update(model_.cls_params, c.grad, adam_c_, cfg_.adam_c.config());
  }
  LossWeights weights = cfg_.loss_weights;
  if (cfg_.id_anneal_iterations > 0 && iteration_ >= cfg_.id_anneal_iterations) weights.lambda_id = 0.0;
  for (int s = 0; s < cfg_.steps_g; ++s) {
    auto g = objective_g(model_, batch, weights, cfg_.rho, true);
    if (!std::isfinite(g.total) || !all_finite(g.grad)) fail_non_finite("generator objective");
    if (s == 0) {
      row.loss_adv_g = g.terms.adv;
      row.loss_cls_g = g.terms.cls;
      row.loss_cyc = g.terms.cyc;
      row.loss_id = g.terms.id;
      row.objective_g = g.total;
    }
    nn::adam_update(model_.gen_params, g.grad, adam_g_, cfg_.adam_g.config());
  }
  ++iteration_;
  return row;
}

std::vector<MetricsRow> Trainer::run_epoch() {
  std::vector<std::size_t> order(data_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  std::vector<MetricsRow> rows;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    const std::size_t len = std::min<std::size_t>(cfg_.batch_size, order.size() - start);
    rows.push_back(step(std::span(order).subspan(start, len)));
    if (progress_) progress_(rows.back());
  }
  ++epoch_;
  if (out_dir_) {
    std::filesystem::create_directories(*out_dir_);
    const auto csv = *out_dir_ / "metrics.csv";
    const bool fresh = !std::filesystem::exists(csv);
    std::ofstream out(csv, std::ios::app);
    if (fresh) out << metrics_csv_header();
    for (const auto& r : rows) out << metrics_csv_row(r);
    if (!out) throw Error(ErrorCode::kIo, "cannot append to " + csv.string());
    if (cfg_.checkpoint_every > 0 && epoch_ % cfg_.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint-%06d.evcm", epoch_);
      save(*out_dir_ / name);
    }
  }
  return rows;
}

std::vector<MetricsRow> Trainer::run() {
  std::vector<MetricsRow> rows;
  while (epoch_ < cfg_.epochs) {
    auto epoch_rows = run_epoch();
    rows.insert(rows.end(), epoch_rows.begin(), epoch_rows.end());
  }
  if (out_dir_) {
    std::filesystem::create_directories(*out_dir_);
    save(*out_dir_ / "model.evcm");
  }
  return rows;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.model = model_;
  ck.state = {{"kind", "trainer"},
              {"config", cfg_},
              {"epoch", epoch_},
              {"iteration", iteration_},
              {"rng", rng_state(rng_)},
              {"adam_steps", {{"g", adam_g_.step}, {"d", adam_d_.step}, {"c", adam_c_.step}}}};
  pack_adam(ck.extra, "adam_g", adam_g_);
  pack_adam(ck.extra, "adam_d", adam_d_);
  pack_adam(ck.extra, "adam_c", adam_c_);
  return ck;
}

void Trainer::save(const std::filesystem::path& path) const { save_checkpoint(path, checkpoint()); }

ModelBundle train_classifier(const ClassifierConfig& cfg, const DomainSet& domains,
                             const std::vector<TrainingUtterance>& data) {
  if (cfg.batch_size < 1 || cfg.epochs < 0 || cfg.segment_len < 1) {
    throw Error(ErrorCode::kConfig, "classifier needs batch_size >= 1, epochs >= 0, segment_len >= 1");
  }
  check_adam(cfg.adam, "adam");
  if (domains.size() != static_cast<std::size_t>(cfg.arch.k)) {
    throw Error(ErrorCode::kConfigMismatch, "architecture K differs from the domain count");
  }
  if (data.empty()) throw Error(ErrorCode::kConfig, "no training utterances");
  check_domains_covered(data, domains);
  const auto raw = raw_segments(data);
  ModelBundle model(cfg.arch, domains, FeatureNorm::fit(raw));
  model.initialize(cfg.seed);
  std::vector<McSegment> z;
  for (const auto& s : raw) z.push_back(model.norm().standardize(s));

  std::mt19937_64 rng(cfg.seed ^ kStreamSalt);
  nn::AdamState adam;
  const std::size_t k = domains.size();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<TrainingSample> batch;
      for (std::size_t i = start; i < start + len; ++i) {
        const std::size_t u = order[i];
        DomainCode code(data[u].domain, k);
        batch.push_back({random_crop(z[u], cfg.segment_len, rng), code, code});
      }
      auto c = objective_c(model, batch, true);
      if (!std::isfinite(c.value) || !all_finite(c.grad)) {
        throw Error(ErrorCode::kNonFinite, "classifier objective became non-finite");
      }
      nn::adam_update(model.cls_params, c.grad, adam, cfg.adam.config());
    }
  }
  return model;
}

}  // namespace evc
