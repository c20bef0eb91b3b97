// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference vs OpenMP kernels, plus a whole campaign both ways.

#include <benchmark/benchmark.h>

#include "xmimo/campaign.hpp"
#include "xmimo/config.hpp"
#include "xmimo/kernels.hpp"
#include "xmimo/rng.hpp"

using namespace xmimo;

namespace {

CMatrix noise_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = {rng.normal(), rng.normal()};
  return m;
}

// 24 clusters of an 8 x 256 link over 50 RB groups.
struct SynthesisInput {
  std::vector<CMatrix> clusters;
  CMatrix phasors;
  SynthesisInput() {
    Rng rng(7, "bench");
    for (int n = 0; n < 24; ++n) clusters.push_back(noise_matrix(rng, 8, 256));
    phasors = noise_matrix(rng, 24, 50);
  }
};

// 181 x 61 grid scanned against 8 snapshots on 256 ports.
struct BartlettInput {
  CMatrix steering, snapshots;
  BartlettInput() {
    Rng rng(8, "bench");
    steering = noise_matrix(rng, 256, 181 * 61);
    snapshots = noise_matrix(rng, 256, 8);
  }
};

void synthesize_serial(benchmark::State& state) {
  static const SynthesisInput in;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::synthesize_rbs_serial(in.clusters, in.phasors));
}

void synthesize_omp(benchmark::State& state) {
  static const SynthesisInput in;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::synthesize_rbs_omp(in.clusters, in.phasors));
}

void bartlett_serial(benchmark::State& state) {
  static const BartlettInput in;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::bartlett_serial(in.steering, in.snapshots));
}

void bartlett_omp(benchmark::State& state) {
  static const BartlettInput in;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::bartlett_omp(in.steering, in.snapshots));
}

CampaignConfig small_campaign() {
  return config_from_json(Json{{"seed", 3},
                               {"bs", "x128"},
                               {"ue", "ue4"},
                               {"ues_per_cell", 3},
                               {"n_drops", 4},
                               {"ttis_per_drop", 50},
                               {"warmup_ttis", 10},
                               {"n_rb_groups", 10},
                               {"layout", {{"n_sites", 1}}}});
}

void campaign_serial(benchmark::State& state) {
  const CampaignConfig cfg = small_campaign();
  for (auto _ : state) benchmark::DoNotOptimize(run_campaign_serial(cfg));
}

void campaign_parallel(benchmark::State& state) {
  const CampaignConfig cfg = small_campaign();
  for (auto _ : state) benchmark::DoNotOptimize(run_campaign(cfg, 0));
}

}  // namespace

BENCHMARK(synthesize_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(synthesize_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(bartlett_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(bartlett_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(campaign_serial)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(campaign_parallel)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
