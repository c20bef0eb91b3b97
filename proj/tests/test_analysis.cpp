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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "support.hpp"
#include "xmimo/analysis.hpp"

using namespace xmimo;
namespace fs = std::filesystem;

namespace {

std::vector<CMatrix> synthetic_channel(const std::vector<SyntheticCluster>& spec, std::uint64_t seed,
                                       const char* bs_preset = "x256", int n_rb = 8) {
  const ClusterSet cs = synthetic_cluster_set(spec, seed);
  return channel_matrix(cs, build_array(array_preset(bs_preset)), build_array(array_preset("ue8")), n_rb).rb;
}

std::pair<double, double> argmax(const AngularProfile& p) {
  Eigen::Index i = 0, j = 0;
  p.power_db.maxCoeff(&i, &j);
  return {p.azimuth[static_cast<std::size_t>(j)], p.zenith[static_cast<std::size_t>(i)]};
}

// Profile made of Gaussian bumps (az, zen, peak dB, width deg) over a -40 dB floor.
AngularProfile bumps(const std::vector<std::array<double, 4>>& spec) {
  AngularProfile p;
  const AngleGrid g;
  p.azimuth = g.azimuths();
  p.zenith = g.zeniths();
  p.power_db = RMatrix::Zero(p.n_zen(), p.n_az());
  for (int i = 0; i < p.n_zen(); ++i)
    for (int j = 0; j < p.n_az(); ++j) {
      double lin = 1e-4;
      for (const auto& b : spec) {
        const double r2 = std::pow(p.azimuth[j] - b[0], 2) + std::pow(p.zenith[i] - b[1], 2);
        lin += db2lin(b[2]) * std::exp(-0.5 * r2 / (b[3] * b[3]));
      }
      p.power_db(i, j) = lin2db(lin);
    }
  p.power_db.array() -= p.power_db.maxCoeff();
  return p;
}

double angle_gap(double az0, double zen0, double az1, double zen1) { return std::hypot(az0 - az1, zen0 - zen1); }

}  // namespace

TEST_CASE("angle grid") {
  const AngleGrid g;
  CHECK(g.azimuths().size() == 181);
  CHECK(g.zeniths().size() == 61);
  CHECK(g.azimuths().front() == -90.0);
  CHECK(g.zeniths().back() == 120.0);
  AngleGrid bad;
  bad.az_step = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("single-ray channel peaks at the ray direction") {
  const auto bs = build_array(array_preset("x256"));
  for (auto [az, zen] : {std::pair{17.0, 95.0}, {-42.0, 88.0}, {3.0, 101.0}}) {
    const auto h = synthetic_channel({{az, zen, 0.0, 0.0, 0.0, 1, 0.0}}, 1);
    const AngularProfile p = power_angular_profile(h, bs);
    CHECK(p.power_db.maxCoeff() == 0.0);
    const auto [paz, pzen] = argmax(p);
    CHECK(paz == doctest::Approx(az));
    CHECK(pzen == doctest::Approx(zen));
    const ClusterEstimate est = detect_clusters(p);
    REQUIRE(est.clusters.size() >= 1);
    CHECK(est.clusters[0].azimuth == doctest::Approx(az));
    CHECK(est.clusters[0].power_db == 0.0);
  }
}

TEST_CASE("profile ignores a global phase rotation of the channel") {
  const auto bs = build_array(array_preset("x128"));
  auto h = synthetic_channel({{-20.0, 96.0, 0.0, 0.0, 3.0, 8, 30e-9}, {25.0, 92.0, -4.0, 2e-7, 1.0, 4, 0.0}}, 2,
                             "x128");
  const AngularProfile a = power_angular_profile(h, bs);
  for (auto& m : h) m *= std::polar(1.0, 1.234);
  const AngularProfile b = power_angular_profile(h, bs);
  CHECK((a.power_db - b.power_db).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("serial and parallel profiles agree bit for bit") {
  const auto bs = build_array(array_preset("x256"));
  const auto h = synthetic_channel({{10.0, 96.0, 0.0, 0.0, 2.0, 6, 50e-9}}, 3);
  const AngularProfile a = power_angular_profile(h, bs, {}, true);
  const AngularProfile b = power_angular_profile(h, bs, {}, false);
  CHECK((a.power_db - b.power_db).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two equal clusters 30 degrees apart give two maxima near the truth") {
  const auto bs = build_array(array_preset("x256"));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto h = synthetic_channel({{-15.0, 96.0, 0.0, 0.0, 0.0, 1, 0.0}, {15.0, 96.0, 0.0, 1e-7, 0.0, 1, 0.0}},
                                     seed);
    const ClusterEstimate est = detect_clusters(power_angular_profile(h, bs));
    REQUIRE(est.clusters.size() >= 2);
    std::vector<double> az{est.clusters[0].azimuth, est.clusters[1].azimuth};
    std::sort(az.begin(), az.end());
    CHECK(std::abs(az[0] + 15.0) <= 2.0);
    CHECK(std::abs(az[1] - 15.0) <= 2.0);
    for (int k = 0; k < 2; ++k) CHECK(std::abs(est.clusters[static_cast<std::size_t>(k)].zenith - 96.0) <= 2.0);
  }
}

TEST_CASE("well-separated generated clusters within 12 dB are all detected") {
  const auto bs = build_array(array_preset("x256"));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, "unit-clusters");
    // Three compact clusters at least 20 degrees apart inside +-40 degrees.
    std::vector<SyntheticCluster> spec;
    const double base = rng.uniform(-40.0, -30.0);
    for (int k = 0; k < 3; ++k) {
      SyntheticCluster c;
      c.aod = base + 25.0 * k + rng.uniform(0.0, 5.0);
      c.zod = rng.uniform(90.0, 100.0);
      c.power_db = k == 0 ? 0.0 : rng.uniform(-6.0, 0.0);
      c.delay = 1e-7 * k;
      spec.push_back(c);
    }
    const ClusterEstimate est = detect_clusters(power_angular_profile(synthetic_channel(spec, seed), bs));
    for (const auto& c : spec) {
      double best = 1e9;
      for (const auto& e : est.clusters) best = std::min(best, angle_gap(c.aod, c.zod, e.azimuth, e.zenith));
      CHECK_MESSAGE(best <= 3.0, "seed " << seed << " cluster at " << c.aod << "," << c.zod);
    }
  }
}

TEST_CASE("cluster detection rules") {
  SUBCASE("one bump gives one cluster") {
    const auto est = detect_clusters(bumps({{{10.0, 95.0, 0.0, 3.0}}}));
    REQUIRE(est.clusters.size() == 1);
    CHECK(est.clusters[0].azimuth == 10.0);
    CHECK(est.clusters[0].zenith == 95.0);
  }
  SUBCASE("a 6 dB weaker second bump is detected second") {
    const auto est = detect_clusters(bumps({{{-30.0, 92.0, -6.0, 3.0}}, {{25.0, 97.0, 0.0, 3.0}}}));
    REQUIRE(est.clusters.size() == 2);
    CHECK(est.clusters[0].azimuth == 25.0);
    CHECK(est.clusters[1].azimuth == -30.0);
    CHECK(est.clusters[1].power_db == doctest::Approx(-6.0).epsilon(1e-3));
  }
  SUBCASE("a bump below threshold is ignored") {
    const auto est = detect_clusters(bumps({{{-30.0, 92.0, -15.0, 3.0}}, {{25.0, 97.0, 0.0, 3.0}}}));
    CHECK(est.clusters.size() == 1);
  }
  SUBCASE("maxima closer than the separation merge") {
    const auto est = detect_clusters(bumps({{{0.0, 90.0, 0.0, 1.0}}, {{4.0, 90.0, -1.0, 1.0}}}));
    CHECK(est.clusters.size() == 1);
  }
  SUBCASE("regions are disjoint and hold only cells within 6 dB of their peak") {
    const AngularProfile p = bumps({{{-20.0, 95.0, 0.0, 4.0}}, {{-8.0, 95.0, -3.0, 4.0}}, {{30.0, 85.0, -9.0, 2.0}}});
    const auto est = detect_clusters(p);
    CHECK(est.clusters.size() == 3);
    std::set<std::pair<int, int>> seen;
    for (std::size_t k = 0; k < est.clusters.size(); ++k) {
      const auto& c = est.clusters[k];
      if (k > 0) CHECK(c.power_db <= est.clusters[k - 1].power_db);
      for (const auto& cell : c.region) {
        CHECK(seen.insert(cell).second);
        CHECK(p.power_db(cell.first, cell.second) >= c.power_db - 6.0 - 1e-12);
        CHECK(est.label[static_cast<std::size_t>(cell.first * p.n_az() + cell.second)] == static_cast<int>(k));
      }
    }
  }
}

TEST_CASE("layer association: region, nearest peak, or none") {
  const auto bs = build_array(array_preset("x256"));
  const Codebook cb = dft_codebook(bs, 4, 4);
  const AngularProfile p = bumps({{{0.0, 96.0, 0.0, 2.0}}});
  const auto est = detect_clusters(p);
  REQUIRE(est.clusters.size() == 1);
  // Pick beams by nominal angle: one on the peak, one ~7 degrees off, one >15 off.
  auto nearest_beam = [&](double az, double zen) {
    int best = -1;
    double gap = 1e9;
    for (int b = 0; b < cb.n_beams(); ++b) {
      if (!cb.beam_angles[b].visible) continue;
      const double g = angle_gap(cb.beam_angles[b].azimuth, cb.beam_angles[b].zenith, az, zen);
      if (g < gap) {
        gap = g;
        best = b;
      }
    }
    return best;
  };
  Precoder pre;
  pre.beam_ids = {nearest_beam(0.0, 96.0), nearest_beam(8.0, 96.0), nearest_beam(25.0, 96.0)};
  pre.beam_groups = {0, 1, 0};
  pre.matrix = CMatrix::Zero(bs.n_ports(), 3);
  pre.layer_power = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  const LayerBeamMap m = associate_layers(pre, cb, est, p);
  REQUIRE(m.layers.size() == 3);
  CHECK(m.layers[0].cluster == 0);
  const auto& far = cb.beam_angles[static_cast<std::size_t>(pre.beam_ids[2])];
  REQUIRE(angle_gap(far.azimuth, far.zenith, 0.0, 96.0) > 15.0);
  CHECK(m.layers[2].cluster == -1);
  const auto& mid = cb.beam_angles[static_cast<std::size_t>(pre.beam_ids[1])];
  if (angle_gap(mid.azimuth, mid.zenith, 0.0, 96.0) <= 10.0) CHECK(m.layers[1].cluster == 0);
  const std::string csv = association_csv(m);
  CHECK(csv.find("none") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("heatmap export round trip and shape") {
  const fs::path dir = fs::temp_directory_path() / "xmimo_unit_heatmap";
  fs::remove_all(dir);
  AngleGrid g;
  g.zen_min = 45.0;
  g.zen_max = 135.0;
  const auto bs = build_array(array_preset("x128"));
  const AngularProfile p =
      power_angular_profile(synthetic_channel({{5.0, 94.0, 0.0, 0.0, 4.0, 8, 1e-7}}, 4, "x128"), bs, g);
  REQUIRE(p.n_az() == 181);
  REQUIRE(p.n_zen() == 91);
  const std::string path = (dir / "heatmap.csv").string();
  export_heatmap(p, path);
  const std::string text = read_text(path);
  std::istringstream in(text);
  int rows = 0;
  for (std::string line; std::getline(in, line); ++rows)
    CHECK(std::count(line.begin(), line.end(), ',') == 181);
  CHECK(rows == 92);
  const AngularProfile q = import_heatmap(path);
  CHECK(q.azimuth == p.azimuth);
  CHECK(q.zenith == p.zenith);
  for (int i = 0; i < p.n_zen(); ++i)
    for (int j = 0; j < p.n_az(); ++j) CHECK(q.power_db(i, j) == round9(p.power_db(i, j)));
  CHECK(heatmap_csv(q) == text);
  fs::remove_all(dir);
  CHECK_THROWS(import_heatmap((dir / "missing.csv").string()));
}

TEST_CASE("beams.csv has one row per layer") {
  const LinkDump dump = synthetic_link_dump({{0.0, 96.0, 0.0, 0.0, 5.0, 8, 1e-7}}, 6);
  AnalyzeOptions o;
  o.n_layers = 8;
  const AnalysisResult r = analyze_link(dump, o);
  CHECK(r.layers.layers.size() == 8);
  const std::string csv = beams_csv(r.layers);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(csv.rfind("layer,beam_id,group,azimuth_deg,zenith_deg,visible\n", 0) == 0);
  std::set<int> layers;
  for (const auto& l : r.layers.layers) layers.insert(l.layer);
  CHECK(layers.size() == 8);
}
