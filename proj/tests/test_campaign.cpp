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

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "support.hpp"
#include "xmimo/campaign.hpp"
#include "xmimo/config.hpp"
#include "xmimo/io.hpp"

using namespace xmimo;
using xmimo::test::random_cmatrix;

namespace {

Json small_doc(const char* mode = "su", const char* ue = "ue4") {
  return Json{{"scenario", "unit"},
              {"seed", 77},
              {"mode", mode},
              {"bs", "x128"},
              {"ue", ue},
              {"ues_per_cell", 3},
              {"n_drops", 2},
              {"ttis_per_drop", 40},
              {"warmup_ttis", 10},
              {"n_rb_groups", 10},
              {"layout", {{"n_sites", 1}}}};
}

}  // namespace

TEST_CASE("percentile is linear interpolation between order statistics") {
  CHECK(percentile({}, 5.0) == 0.0);
  CHECK(percentile({3.0}, 5.0) == 3.0);
  CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 0.0) == 1.0);
  CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 100.0) == 4.0);
  CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 50.0) == doctest::Approx(2.5));
  std::vector<double> v(21);
  std::iota(v.begin(), v.end(), 0.0);
  CHECK(percentile(v, 5.0) == doctest::Approx(1.0));
  CHECK(percentile(v, 12.5) == doctest::Approx(2.5));
}

TEST_CASE("water-filled SU capacity") {
  const std::vector<CMatrix> eye{CMatrix::Identity(2, 2)};
  CHECK(su_capacity(eye, 1.0) == doctest::Approx(2.0 * std::log2(1.5)).epsilon(1e-12));
  // Strongly unequal modes: all power on the strong one.
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 0.01;
  const std::vector<CMatrix> skew{d};
  CHECK(su_capacity(skew, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const CMatrix h = random_cmatrix(rng, 8, 32);
    const std::vector<CMatrix> full{h}, part{h.topRows(4)};
    CHECK(su_capacity(full, 2.0) >= su_capacity(part, 2.0) - 1e-12);
  }
}

TEST_CASE("config validation names the offending field") {
  Json doc = small_doc();
  doc["n_drops"] = 0;
  CHECK_THROWS_WITH_AS(config_from_json(doc), doctest::Contains("n_drops"), ConfigError);
  doc = small_doc();
  doc["bs"] = "x999";
  CHECK_THROWS_AS(config_from_json(doc), ConfigError);
  doc = small_doc();
  doc["bs_array"] = {{"subarray_len", 0}};
  CHECK_THROWS_WITH_AS(config_from_json(doc), doctest::Contains("bs_array.subarray_len"), ConfigError);
  doc = small_doc("mu");
  doc["precoding"] = {{"per_rb", true}};
  CHECK_THROWS_WITH_AS(config_from_json(doc), doctest::Contains("per_rb"), ConfigError);
  doc = small_doc();
  doc.erase("seed");
  CHECK_THROWS_WITH_AS(config_from_json(doc), doctest::Contains("seed"), ConfigError);
}

TEST_CASE("campaign report is independent of the thread count") {
  for (const char* mode : {"su", "mu"}) {
    const CampaignConfig cfg = config_from_json(small_doc(mode));
    const ThroughputReport serial = run_campaign_serial(cfg);
    const ThroughputReport one = run_campaign(cfg, 1);
    const ThroughputReport four = run_campaign(cfg, 4);
    const Json eff = config_to_json(cfg);
    const std::string a = report_to_json(serial, "x", "", eff).dump(2);
    CHECK(a == report_to_json(one, "x", "", eff).dump(2));
    CHECK(a == report_to_json(four, "x", "", eff).dump(2));
    CHECK(per_ue_csv(serial) == per_ue_csv(four));
  }
}

TEST_CASE("report bookkeeping") {
  const CampaignConfig cfg = config_from_json(small_doc("mu", "ue8"));
  const ThroughputReport r = run_campaign(cfg);
  const long hist_sum = std::accumulate(r.layer_histogram.begin(), r.layer_histogram.end(), 0L);
  CHECK(hist_sum == r.decisions);
  // Every cell decides in every measured TTI.
  CHECK(r.decisions == static_cast<long>(cfg.n_drops) * cfg.ttis_per_drop * cfg.layout.n_cells());
  CHECK(r.ues.size() == static_cast<std::size_t>(cfg.n_drops * cfg.ues_per_cell * cfg.layout.n_cells()));
  double layers = 0.0, gt4 = 0.0;
  for (std::size_t k = 0; k < r.layer_histogram.size(); ++k) {
    layers += static_cast<double>(k * r.layer_histogram[k]);
    if (k > 4) gt4 += static_cast<double>(r.layer_histogram[k]);
    if (k == 0) CHECK(r.layer_histogram[k] == 0);
    CHECK(static_cast<int>(k) <= cfg.scheduler.max_total_layers);
  }
  CHECK(r.mean_layers == doctest::Approx(layers / r.decisions));
  CHECK(r.frac_layers_gt4 == doctest::Approx(gt4 / r.decisions));
  std::vector<double> tp;
  double sum = 0.0;
  for (const auto& u : r.ues) {
    tp.push_back(u.throughput_bps);
    sum += u.throughput_bps;
    CHECK(u.scheduled_fraction >= 0.0);
    CHECK(u.scheduled_fraction <= 1.0);
  }
  CHECK(r.mean_throughput == doctest::Approx(sum / static_cast<double>(tp.size())));
  CHECK(r.p5_throughput == doctest::Approx(percentile(tp, 5.0)));
  CHECK(r.cell_throughput == doctest::Approx(sum / (cfg.n_drops * cfg.layout.n_cells())));
  CHECK(r.drop_mean_capacity.size() == static_cast<std::size_t>(cfg.n_drops));
}

TEST_CASE("more receive ports never lower the per-drop SU capacity") {
  Json d4 = small_doc("su", "ue4"), d8 = small_doc("su", "ue8");
  d4["n_drops"] = d8["n_drops"] = 3;
  d4["ttis_per_drop"] = d8["ttis_per_drop"] = 5;
  const ThroughputReport r4 = run_campaign(config_from_json(d4));
  const ThroughputReport r8 = run_campaign(config_from_json(d8));
  REQUIRE(r4.drop_mean_capacity.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r8.drop_mean_capacity[i] >= r4.drop_mean_capacity[i]);
}

TEST_CASE("drops depend only on the campaign seed and index") {
  const CampaignConfig cfg = config_from_json(small_doc());
  CHECK(campaign_drop(cfg, 1).coupling_db == campaign_drop(cfg, 1).coupling_db);
  CHECK(campaign_drop(cfg, 0).coupling_db != campaign_drop(cfg, 1).coupling_db);
  CHECK(drop_seed(5, 0) != drop_seed(5, 1));
  const Drop drop = campaign_drop(cfg, 0);
  DropEngine engine(cfg, drop, drop_seed(*cfg.seed, 0));
  CHECK(engine.n_ues() == static_cast<int>(drop.ues.size()));
  for (int u = 0; u < engine.n_ues(); ++u) {
    CHECK(engine.serving_cell(u) == drop.ues[static_cast<std::size_t>(u)].serving_cell);
    CHECK(engine.su_rank(u) >= 1);
    CHECK(engine.su_rank(u) <= 4);
    const auto h = engine.serving_channel(u);
    CHECK(static_cast<int>(h.size()) == cfg.n_rb_groups);
    CHECK(h.front().rows() == 4);
    CHECK(h.front().cols() == 128);
  }
}

TEST_CASE("compare expresses metrics relative to the baseline") {
  ReportSummary a, b;
  a.label = "ue4";
  b.label = "ue8";
  a.bandwidth = b.bandwidth = 100e6;
  a.carrier = b.carrier = 7.125e9;
  a.isd = b.isd = 500.0;
  a.n_sites = b.n_sites = 7;
  a.sectors_per_site = b.sectors_per_site = 3;
  a.ues_per_cell = b.ues_per_cell = 10;
  a.mean_throughput = 100.0;
  b.mean_throughput = 130.0;
  a.p5_throughput = 10.0;
  b.p5_throughput = 12.0;
  a.cell_throughput = 1000.0;
  b.cell_throughput = 1500.0;
  const auto rows = compare({a, b}, "ue4");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rel_mean_pct == doctest::Approx(100.0));
  CHECK(rows[1].rel_mean_pct == doctest::Approx(130.0));
  CHECK(rows[1].rel_p5_pct == doctest::Approx(120.0));
  CHECK(rows[1].rel_cell_pct == doctest::Approx(150.0));
  CHECK_THROWS_AS(compare({a, b}, "nope"), ConfigError);
  b.bandwidth = 50e6;
  CHECK_THROWS_AS(compare({a, b}, "ue4"), ConfigError);
}

TEST_CASE("peak-rate probe respects the layer cap arithmetic") {
  const CampaignConfig cfg = config_from_json(Json{{"seed", 9}, {"bs", "x256"}, {"ue", "ue8"}});
  const double cap = (1.0 - cfg.overhead) * cfg.bandwidth * kSeCap256Qam;
  const double r8 = peak_rate_probe(cfg, 100.0, true, 8, 20);
  const double r1 = peak_rate_probe(cfg, 100.0, true, 1, 20);
  CHECK(r8 <= 8.0 * cap * (1.0 + 1e-12));
  CHECK(r1 <= cap * (1.0 + 1e-12));
  CHECK(r1 > 0.0);
  CHECK(r8 > r1);
  CHECK(peak_rate_probe(cfg, 100.0, true, 8, 20) == r8);
}
