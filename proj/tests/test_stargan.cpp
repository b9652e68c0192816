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
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "error_code.hpp"
#include "evc/nn.hpp"
#include "evc/stargan.hpp"
#include "tiny_models.hpp"

using namespace evc;
using namespace evc::testing;

namespace {

McSegment random_segment(int q, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  RowMatrix x(q, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return McSegment(x);
}

ModelBundle random_model(const ArchConfig& arch, std::uint64_t seed) {
  std::vector<std::string> labels;
  for (int i = 0; i < arch.k; ++i) labels.push_back("d" + std::to_string(i));
  ModelBundle m(arch, DomainSet(labels), FeatureNorm::identity(arch.q));
  m.initialize(seed);
  return m;
}

const double kLn2 = std::log(2.0);

}  // namespace

TEST_CASE("adversarial and classification losses on probabilities") {
  const std::vector<double> half = {0.5, 0.5, 0.5};
  CHECK(adversarial_d_loss(half, half) == doctest::Approx(2 * kLn2).epsilon(1e-12));
  CHECK(adversarial_d_loss(std::vector<double>{0.9}, std::vector<double>{0.2}) ==
        doctest::Approx(-std::log(0.9) - std::log(0.8)).epsilon(1e-12));
  CHECK(std::abs(adversarial_d_loss(std::vector<double>{0.9}, std::vector<double>{0.2}) - 0.32850) < 1e-5);
  CHECK(adversarial_d_loss(std::vector<double>{1.0}, std::vector<double>{0.0}) < 1e-6);

  CHECK(adversarial_g_loss(std::vector<double>{1.0}) < 1e-6);
  CHECK(adversarial_g_loss(std::vector<double>{0.5}) == doctest::Approx(kLn2).epsilon(1e-12));
  CHECK(std::abs(adversarial_g_loss(std::vector<double>{0.2, 0.8}) - 0.91629) < 1e-5);

  CHECK(classification_loss(std::vector<double>{1.0}) < 1e-6);
  CHECK(classification_loss(std::vector<double>{0.25}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(classification_loss(std::vector<double>{0.5}) == doctest::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("clamping keeps the losses finite at 0 and 1") {
  const std::vector<double> zero = {0.0}, one = {1.0};
  CHECK(std::isfinite(adversarial_d_loss(zero, one)));
  CHECK(adversarial_d_loss(zero, one) == doctest::Approx(-2 * std::log(kProbabilityFloor)).epsilon(1e-9));
  CHECK(std::isfinite(adversarial_g_loss(zero)));
  CHECK(std::isfinite(classification_loss(zero)));
}

TEST_CASE("property: losses are non-negative on (0, 1)") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1e-9, 1.0 - 1e-9);
  for (int t = 0; t < 200; ++t) {
    const std::vector<double> a = {u(rng), u(rng)}, b = {u(rng)};
    CHECK(adversarial_d_loss(a, b) >= 0.0);
    CHECK(adversarial_g_loss(a) >= 0.0);
    CHECK(classification_loss(b) >= 0.0);
  }
}

TEST_CASE("entrywise rho-norm: 0.5 residual over 2 x 3") {
  const RowMatrix r = RowMatrix::Constant(2, 3, 0.5);
  CHECK(lp_norm(r, 1.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(lp_norm(r, 2.0) == doctest::Approx(std::sqrt(6 * 0.25)).epsilon(1e-12));
  CHECK(std::abs(lp_norm(r, 2.0) - 1.22474) < 1e-5);
  CHECK(lp_norm(RowMatrix::Zero(2, 3), 1.0) == 0.0);
  CHECK(lp_norm(-r, 1.0) == lp_norm(r, 1.0));
}

TEST_CASE("weighted generator objective") {
  const GeneratorTerms t{0.5, 1.0, 2.0, 0.1};
  CHECK(combine_generator_objective(t, {1, 1, 1}) == doctest::Approx(3.6).epsilon(1e-12));
  CHECK(combine_generator_objective(t, {0, 0, 0}) == 0.5);
  CHECK(combine_generator_objective(t, {0, 10, 0}) == doctest::Approx(20.5).epsilon(1e-12));
  CHECK_THROWS_AS(LossWeights({-1, 0, 0}).validate(), Error);
}

TEST_CASE("model-level adversarial losses: D = 0.5 everywhere gives 2 ln 2 and ln 2") {
  ModelBundle m = tiny_model(2, 4);  // all parameters zero
  const std::vector<LabeledSegment> batch = {{constant_segment(2, 3, 0.3), DomainCode(0, 4)},
                                             {constant_segment(2, 3, -1.0), DomainCode(2, 4)}};
  CHECK(loss_adv_d(m, batch, batch) == doctest::Approx(2 * kLn2).epsilon(1e-12));
  CHECK(loss_adv_g(m, batch) == doctest::Approx(kLn2).epsilon(1e-12));
  CHECK(loss_cls_c(m, batch) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(loss_cls_g(m, batch) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("model-level D of 0.9 on the real and 0.2 on the fake gives 0.32850") {
  ModelBundle m = tiny_model(2, 2);
  set_discriminator_code_logits(m, {logit(0.9), logit(0.2)});
  set_identity_generator(m);
  const std::vector<LabeledSegment> reals = {{constant_segment(2, 3, 0.4), DomainCode(0, 2)}};
  const std::vector<LabeledSegment> fakes = {{constant_segment(2, 3, 0.4), DomainCode(1, 2)}};
  CHECK(discriminate(m, reals[0].x, reals[0].c) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(std::abs(loss_adv_d(m, reals, fakes) - 0.32850) < 1e-5);
  set_discriminator_code_logits(m, {logit(0.2), logit(0.8)});
  const std::vector<LabeledSegment> two = {{constant_segment(2, 3, 0.4), DomainCode(0, 2)},
                                           {constant_segment(2, 3, 0.4), DomainCode(1, 2)}};
  CHECK(std::abs(loss_adv_g(m, two) - 0.91629) < 1e-5);
}

TEST_CASE("model-level cycle and identity losses") {
  ModelBundle m = tiny_model(2, 3);
  const McSegment x = constant_segment(2, 3, 0.5);
  const std::vector<CycleSample> cyc = {{x, DomainCode(0, 3), DomainCode(2, 3)}};
  const std::vector<LabeledSegment> id = {{x, DomainCode(1, 3)}, {x, DomainCode(0, 3)}};
  // Zero G: the residual is -x everywhere.
  CHECK(loss_cyc(m, cyc, 1.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(loss_cyc(m, cyc, 2.0) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-12));
  CHECK(loss_id(m, id, 1.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(loss_id(m, id, 2.0) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-12));
  set_identity_generator(m);
  std::mt19937_64 rng(9);
  const std::vector<CycleSample> rand_cyc = {{random_segment(2, 7, rng), DomainCode(0, 3), DomainCode(1, 3)}};
  CHECK(loss_cyc(m, rand_cyc, 1.0) < 1e-12);
  CHECK(loss_id(m, std::vector<LabeledSegment>{{rand_cyc[0].x, DomainCode(2, 3)}}, 2.0) < 1e-12);
}

TEST_CASE("minimizing the identity loss alone drives a linear G to the identity on the data span") {
  ModelBundle m = tiny_model(3, 2);
  m.initialize(17);
  std::fill(m.disc_params.begin(), m.disc_params.end(), 0.0);  // D constant: no adversarial gradient
  std::mt19937_64 rng(3);
  std::vector<TrainingSample> batch;
  for (int b = 0; b < 4; ++b) {
    const McSegment x = random_segment(3, 16, rng);
    batch.push_back({x, DomainCode(b % 2, 2), DomainCode(b % 2, 2)});
  }
  const LossWeights w{0.0, 0.0, 1.0};
  const double start = objective_g(m, batch, w, 2.0, false).terms.id;
  nn::AdamState state;
  for (int it = 0; it < 3000; ++it) {
    const auto o = objective_g(m, batch, w, 2.0, true);
    // The norm is not squared, so its gradient keeps unit size; decay the step.
    nn::adam_update(m.gen_params, o.grad, state, {2e-2 * std::pow(0.997, it), 0.9});
  }
  const double end = objective_g(m, batch, w, 2.0, false).terms.id;
  CHECK(end < 1e-3 * start);
  const McSegment probe = random_segment(3, 5, rng);
  CHECK((generate(m, probe, DomainCode(0, 2)).values() - probe.values()).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("generate preserves shape and is deterministic") {
  for (const auto& arch : {ArchConfig::compact(), ArchConfig::reference(), ArchConfig::miniature()}) {
    const ModelBundle m = random_model(arch, 5);
    std::mt19937_64 rng(1);
    for (int n : {arch.time_multiple() * 8, 37, 1}) {
      const McSegment x = random_segment(arch.q, n, rng);
      const McSegment y = generate(m, x, DomainCode(1, arch.k));
      CHECK(y.q() == arch.q);
      CHECK(y.n() == n);
      CHECK(y.values().allFinite());
      CHECK(generate(m, x, DomainCode(1, arch.k)).values() == y.values());
    }
  }
}

TEST_CASE("shape and code mismatches are refused") {
  const ModelBundle m = random_model(ArchConfig::compact(), 1);
  std::mt19937_64 rng(1);
  CHECK(error_code_of([&] { generate(m, random_segment(24, 32, rng), DomainCode(0, 4)); }) == ErrorCode::kShape);
  CHECK(error_code_of([&] { generate(m, random_segment(36, 32, rng), DomainCode(0, 3)); }).has_value());
  CHECK(error_code_of([&] { discriminate(m, random_segment(36, 32, rng), DomainCode(0, 5)); }).has_value());
  RowMatrix bad = RowMatrix::Zero(36, 4);
  bad(0, 0) = std::nan("");
  CHECK(error_code_of([&] { McSegment{bad}; }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("discriminator codomain and conditioning") {
  const ModelBundle zero = tiny_model(2, 2);
  CHECK(discriminate(zero, constant_segment(2, 4, 1.0), DomainCode(0, 2)) == 0.5);
  CHECK(discriminator_logit(zero, constant_segment(2, 4, 1.0), DomainCode(0, 2)) == 0.0);

  const ModelBundle m = random_model(ArchConfig::compact(), 2);
  std::mt19937_64 rng(6);
  int differ = 0;
  for (int t = 0; t < 10; ++t) {
    const McSegment y = random_segment(36, 64, rng);
    const double a = discriminate(m, y, DomainCode(0, 4));
    const double b = discriminate(m, y, DomainCode(3, 4));
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    differ += std::abs(a - b) > 1e-9;
  }
  CHECK(differ >= 9);
}

TEST_CASE("classifier outputs lie on the simplex") {
  const ModelBundle zero = tiny_model(2, 4);
  for (double p : classify(zero, constant_segment(2, 5, 0.7))) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  for (const auto& arch : {ArchConfig::compact(), ArchConfig::reference()}) {
    const ModelBundle m = random_model(arch, 8);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 5; ++t) {
      const auto p = classify(m, random_segment(36, 64, rng));
      REQUIRE(p.size() == 4);
      double sum = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("objective decomposition matches the model-level losses") {
  const ModelBundle m = random_model(ArchConfig::miniature(), 3);
  std::mt19937_64 rng(12);
  std::vector<TrainingSample> batch;
  for (int b = 0; b < 3; ++b) batch.push_back({random_segment(4, 8, rng), DomainCode(b % 2, 2), DomainCode((b + 1) % 2, 2)});
  const LossWeights w{0.7, 1.3, 0.9};
  const auto o = objective_g(m, batch, w, 1.0, false);
  std::vector<LabeledSegment> fakes, ids, reals;
  std::vector<CycleSample> cyc;
  for (const auto& s : batch) {
    fakes.push_back({s.x, s.target});
    ids.push_back({s.x, s.source});
    reals.push_back({s.x, s.source});
    cyc.push_back({s.x, s.source, s.target});
  }
  CHECK(o.terms.adv == doctest::Approx(loss_adv_g(m, fakes)).epsilon(1e-12));
  CHECK(o.terms.cls == doctest::Approx(loss_cls_g(m, fakes)).epsilon(1e-12));
  CHECK(o.terms.cyc == doctest::Approx(loss_cyc(m, cyc, 1.0)).epsilon(1e-12));
  CHECK(o.terms.id == doctest::Approx(loss_id(m, ids, 1.0)).epsilon(1e-12));
  CHECK(o.total == doctest::Approx(combine_generator_objective(o.terms, w)).epsilon(1e-12));
  CHECK(objective_d(m, batch, false).value == doctest::Approx(loss_adv_d(m, reals, fakes)).epsilon(1e-12));
  CHECK(objective_c(m, batch, false).value == doctest::Approx(loss_cls_c(m, reals)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central differences at one point") {
  ModelBundle m = random_model(ArchConfig::miniature(), 21);
  std::mt19937_64 rng(4);
  std::vector<TrainingSample> batch;
  for (int b = 0; b < 2; ++b) batch.push_back({random_segment(4, 8, rng), DomainCode(b, 2), DomainCode(1 - b, 2)});
  const LossWeights w{1.0, 1.0, 1.0};
  const auto g = objective_g(m, batch, w, 2.0, true);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m.gen_params.size(); ++i) {
    const double s = m.gen_params[i], h = 1e-5;
    m.gen_params[i] = s + h;
    const double fp = objective_g(m, batch, w, 2.0, false).total;
    m.gen_params[i] = s - h;
    const double fm = objective_g(m, batch, w, 2.0, false).total;
    m.gen_params[i] = s;
    const double fd = (fp - fm) / (2 * h);
    num += (fd - g.grad[i]) * (fd - g.grad[i]);
    den += fd * fd;
  }
  CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("architecture presets validate and serialize") {
  for (const auto& name : {"reference", "compact", "miniature"}) {
    const ArchConfig a = ArchConfig::preset(name);
    a.validate();
    const nlohmann::json j = a;
    CHECK(j.get<ArchConfig>() == a);
    CHECK(nlohmann::json(name).get<ArchConfig>() == a);
    CHECK(a.fingerprint() == j.get<ArchConfig>().fingerprint());
  }
  CHECK(ArchConfig::reference().fingerprint() != ArchConfig::compact().fingerprint());
  CHECK(ArchConfig::compact(24, 3).q == 24);
  CHECK(error_code_of([] { ArchConfig::preset("resnet"); }) == ErrorCode::kConfig);
  ArchConfig broken = ArchConfig::compact();
  broken.discriminator.back().out_channels = 2;
  CHECK(error_code_of([&] { broken.validate(); }) == ErrorCode::kShape);
}

TEST_CASE("feature normalization standardizes and inverts") {
  std::mt19937_64 rng(8);
  std::vector<McSegment> segs;
  for (int i = 0; i < 3; ++i) {
    RowMatrix v = random_segment(4, 20 + i, rng).values();
    v.row(1).array() = v.row(1).array() * 5.0 + 3.0;
    v.row(3).setConstant(2.0);
    segs.emplace_back(v);
  }
  const FeatureNorm n = FeatureNorm::fit(segs);
  CHECK(n.stddev[3] == 1.0);  // constant coefficient keeps unit scale
  double sum = 0.0, sq = 0.0, count = 0.0;
  for (const auto& s : segs) {
    const McSegment z = n.standardize(s);
    sum += z.values().row(1).sum();
    sq += z.values().row(1).squaredNorm();
    count += s.n();
    CHECK((n.destandardize(z).values() - s.values()).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(std::abs(sum / count) < 1e-12);
  CHECK(std::abs(sq / count - 1.0) < 1e-12);
}

TEST_CASE("random initialization is reproducible from the seed") {
  const ModelBundle a = random_model(ArchConfig::compact(), 42);
  const ModelBundle b = random_model(ArchConfig::compact(), 42);
  const ModelBundle c = random_model(ArchConfig::compact(), 43);
  CHECK(a.gen_params == b.gen_params);
  CHECK(a.disc_params == b.disc_params);
  CHECK(a.cls_params == b.cls_params);
  CHECK(a.gen_params != c.gen_params);
}
