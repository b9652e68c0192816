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
#include <random>

#include <benchmark/benchmark.h>

#include "evc/stargan.hpp"
#include "evc/vocoder.hpp"

using namespace evc;

namespace {

McSegment noise(int q, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  RowMatrix x(q, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return McSegment(x);
}

ModelBundle model(const ArchConfig& arch) {
  ModelBundle m(arch, DomainSet::defaults(), FeatureNorm::identity(arch.q));
  m.initialize(1);
  return m;
}

// A 1 s vowel-like signal: two harmonics at 150 Hz plus a little noise.
std::vector<double> voiced_second() {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 0.01);
  std::vector<double> x(16000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    x[i] = 0.3 * std::sin(2 * M_PI * 150 * t) + 0.1 * std::sin(2 * M_PI * 300 * t) + nd(rng);
  }
  return x;
}

void BM_Generate(benchmark::State& state, ArchConfig arch) {
  const ModelBundle m = model(arch);
  const McSegment x = noise(arch.q, static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(generate(m, x, DomainCode(2, 4)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_CAPTURE(BM_Generate, compact, ArchConfig::compact())->Arg(128)->Arg(512);
BENCHMARK_CAPTURE(BM_Generate, reference, ArchConfig::reference())->Arg(128);

void BM_ObjectiveG(benchmark::State& state, ArchConfig arch) {
  const ModelBundle m = model(arch);
  std::vector<TrainingSample> batch = {{noise(arch.q, 128, 4), DomainCode(0, 4), DomainCode(1, 4)},
                                       {noise(arch.q, 128, 5), DomainCode(3, 4), DomainCode(2, 4)}};
  for (auto _ : state) benchmark::DoNotOptimize(objective_g(m, batch, LossWeights{}, 1.0, true));
}
BENCHMARK_CAPTURE(BM_ObjectiveG, compact, ArchConfig::compact());
BENCHMARK_CAPTURE(BM_ObjectiveG, reference, ArchConfig::reference())->Unit(benchmark::kMillisecond);

void BM_MccFromEnvelope(benchmark::State& state) {
  RowMatrix env(200, 513);
  for (Eigen::Index n = 0; n < env.rows(); ++n) {
    for (Eigen::Index k = 0; k < env.cols(); ++k) env(n, k) = 1e-3 / (1.0 + 1e-4 * k * k) + 1e-8;
  }
  for (auto _ : state) benchmark::DoNotOptimize(mcc_from_envelope(env, static_cast<int>(state.range(0)), 0.42));
  state.SetItemsProcessed(state.iterations() * env.rows());
}
BENCHMARK(BM_MccFromEnvelope)->Arg(24)->Arg(36);

void BM_Analyze(benchmark::State& state) {
  const auto backend = make_backend(state.range(0) == 0 ? F0Method::kHarvest : F0Method::kDio);
  const auto x = voiced_second();
  for (auto _ : state) benchmark::DoNotOptimize(analyze(*backend, x, 16000));
}
BENCHMARK(BM_Analyze)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Synthesize(benchmark::State& state) {
  const auto backend = make_backend(F0Method::kDio);
  const FeatureSequence f = analyze(*backend, voiced_second(), 16000);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize(*backend, f));
}
BENCHMARK(BM_Synthesize)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
