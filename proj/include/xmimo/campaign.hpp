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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmimo/arrays.hpp"
#include "xmimo/channel.hpp"
#include "xmimo/common.hpp"
#include "xmimo/scheduler.hpp"

namespace xmimo {

struct LinkConfig {
  double se_cap = kSeCap256Qam;
  double implementation_loss_db = kDefaultImplementationLossDb;
};

struct PrecodingConfig {
  bool per_rb = false;  // SU only: eigen-precoder per RB group
  bool water_filling = false;
};

struct CampaignConfig {
  std::string scenario = "custom";
  std::optional<std::uint64_t> seed;
  Mode mode = Mode::su;
  std::string bs = "x256";
  std::string ue = "ue8";
  ArrayConfig bs_array;  // resolved: preset + overrides + carrier
  ArrayConfig ue_array;
  int ues_per_cell = 10;
  double isd = 500.0;
  NetworkLayout layout;  // isd is copied from the top-level field
  int n_drops = 1;
  int ttis_per_drop = 1000;  // measured TTIs, after warmup
  int warmup_ttis = 200;
  double bandwidth = 100e6;
  int n_rb_groups = 50;
  double carrier = 7.125e9;
  double tx_power_dbm = 55.0;
  double noise_figure_db = 9.0;
  double overhead = kDefaultOverhead;
  double tti_seconds = 1e-3;
  int explicit_interferers = 2;  // strongest cells simulated with full channels
  LinkConfig link;
  SchedulerConfig scheduler;
  PrecodingConfig precoding;
  bool decision_log = false;

  double rb_bandwidth() const { return bandwidth / n_rb_groups; }
  double noise_dbm() const;
  /// Copies the shared fields (isd, carrier, bandwidth, overhead, link) into
  /// the nested structs and validates everything; throws ConfigError.
  void finalize();
};

/// One decision as it went on air, for the optional log.
struct DecisionRecord {
  int drop = 0;
  long tti = 0;
  int cell = 0;
  std::vector<int> ues;  // global UE ids
  std::vector<int> ranks;
  std::vector<double> mean_sinr_db;  // per UE, mean over its layers and RBs
  double bits = 0.0;
};

struct UeResult {
  int drop = 0;
  int ue = 0;  // id within the drop
  int cell = 0;
  bool los = false;
  double coupling_db = 0.0;
  double throughput_bps = 0.0;
  double scheduled_fraction = 0.0;
  double su_capacity = 0.0;  // per-RB water-filled capacity, bps/Hz
};

struct ThroughputReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<UeResult> ues;
  double mean_throughput = 0.0;
  double p5_throughput = 0.0;
  std::vector<long> layer_histogram;  // index = layers in a decision
  long decisions = 0;
  double mean_layers = 0.0;
  double frac_layers_gt4 = 0.0;
  double cell_throughput = 0.0;  // mean over cells and drops of the served sum
  std::vector<double> drop_mean_capacity;
  std::vector<DecisionRecord> decision_log;
};

/// Everything one drop produces; merged in drop order.
struct DropResult {
  std::vector<UeResult> ues;
  std::vector<long> layer_histogram;
  long decisions = 0;
  std::vector<DecisionRecord> decision_log;
};

/// Channels, precoders and scheduler inputs of one drop, built once and
/// reused by every TTI.
class DropEngine {
 public:
  DropEngine(const CampaignConfig& cfg, const Drop& drop, std::uint64_t drop_seed,
             std::optional<int> rank_override = {});
  ~DropEngine();
  DropEngine(const DropEngine&) = delete;
  DropEngine& operator=(const DropEngine&) = delete;

  /// Runs warmup + measured TTIs.
  DropResult run(int drop_index, int warmup, int measured);

  /// Per-RB channel of a UE towards its serving cell, thermal noise = 1.
  std::vector<CMatrix> serving_channel(int ue) const;
  ClusterSet serving_clusters(int ue) const;
  int serving_cell(int ue) const;
  int n_ues() const;
  /// Selected SU rank and the noise-plus-interference level the scheduler
  /// assumes for it.
  int su_rank(int ue) const;
  double cqi_noise(int ue) const;
  double su_capacity(int ue) const;

 private:
  struct Impl;
  Impl* impl_;
};

/// Seed of drop `index` of a campaign.
std::uint64_t drop_seed(std::uint64_t campaign_seed, int index);

/// UE placement of drop `index`; the matching engine seed is drop_seed().
Drop campaign_drop(const CampaignConfig& cfg, int index);

/// Mean over RB groups of the water-filled capacity log2 det(I + H Q H^H /
/// noise), tr Q = 1, in bps/Hz.
double su_capacity(std::span<const CMatrix> per_rb, double noise_power);

/// Drops run concurrently over `threads` workers (0 = all cores). The result
/// does not depend on the thread count.
ThroughputReport run_campaign(const CampaignConfig& cfg, int threads = 0);
ThroughputReport run_campaign_serial(const CampaignConfig& cfg);

/// Linear-interpolation percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

struct CompareRow {
  std::string group;    // values of the non-compared sweep keys
  std::string variant;  // label of this report
  std::string baseline;
  double mean_throughput = 0.0, rel_mean_pct = 100.0;
  double p5_throughput = 0.0, rel_p5_pct = 100.0;
  double cell_throughput = 0.0, rel_cell_pct = 100.0;
  double mean_layers = 0.0;
  double frac_layers_gt4 = 0.0;
};

/// Shared-semantics fingerprint of a report used by compare().
struct ReportSummary {
  std::string label;
  std::string group;
  std::string mode;
  double bandwidth = 0.0;
  double carrier = 0.0;
  double isd = 0.0;
  int n_sites = 0;
  int sectors_per_site = 0;
  int ues_per_cell = 0;
  double mean_throughput = 0.0;
  double p5_throughput = 0.0;
  double cell_throughput = 0.0;
  double mean_layers = 0.0;
  double frac_layers_gt4 = 0.0;
};

ReportSummary summarize(const ThroughputReport& r, const CampaignConfig& cfg,
                        const std::string& label, const std::string& group = "");

/// Each report relative to the baseline (same group). Throws ConfigError when
/// bandwidth, carrier or layout differ inside a group.
std::vector<CompareRow> compare(const std::vector<ReportSummary>& reports,
                                const std::string& baseline_label);

/// Single UE at `distance` metres on the boresight of a single-sector site,
/// forced LOS, no shadowing, `rank` layers (0: rank adaptation), mean
/// throughput over `ttis`.
double peak_rate_probe(const CampaignConfig& cfg, double distance, bool los = true, int rank = 8,
                       int ttis = 100);

}  // namespace xmimo
