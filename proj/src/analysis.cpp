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

#include "xmimo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "xmimo/kernels.hpp"
#include "xmimo/rng.hpp"

namespace xmimo {

namespace {

std::vector<double> axis(double lo, double hi, double step) {
  std::vector<double> v;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int i = 0; i < n; ++i) v.push_back(lo + i * step);
  return v;
}

double angular_distance(double az1, double zen1, double az2, double zen2) {
  return std::hypot(az1 - az2, zen1 - zen2);
}

}  // namespace

std::vector<double> AngleGrid::azimuths() const { return axis(az_min, az_max, az_step); }
std::vector<double> AngleGrid::zeniths() const { return axis(zen_min, zen_max, zen_step); }

void AngleGrid::validate() const {
  if (!(az_step > 0.0) || !(zen_step > 0.0)) throw ConfigError("grid: steps must be > 0");
  if (!(az_max >= az_min) || !(zen_max >= zen_min)) throw ConfigError("grid: max must not be below min");
  if (!(zen_min > 0.0) || !(zen_max < 180.0)) throw ConfigError("grid: zenith must stay inside (0, 180)");
}

AngularProfile power_angular_profile(std::span<const CMatrix> per_rb, const ArrayGeometry& bs,
                                     const AngleGrid& grid, bool parallel) {
  grid.validate();
  if (per_rb.empty()) throw std::invalid_argument("power_angular_profile: no RB matrices");
  const int ppg = bs.ports_per_group();
  if (per_rb.front().cols() != bs.n_ports())
    throw std::invalid_argument("power_angular_profile: channel width does not match the array");

  // All snapshots enter only through their covariance, so a root of it is
  // enough and much narrower than the snapshot matrix.
  CMatrix cov = CMatrix::Zero(ppg, ppg);
  for (const CMatrix& h : per_rb)
    for (int g = 0; g < bs.n_groups(); ++g) {
      const auto hg = h.middleCols(static_cast<Eigen::Index>(g) * ppg, ppg);
      cov.noalias() += hg.adjoint() * hg;
    }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(cov);
  const RVector lam = es.eigenvalues();
  const double lmax = std::max(lam.maxCoeff(), 0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = lam.size() - 1; i >= 0; --i)
    if (lam[i] > 1e-13 * lmax) keep.push_back(i);
  CMatrix root(ppg, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    root.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]) * std::sqrt(lam[keep[k]]);

  AngularProfile prof;
  prof.azimuth = grid.azimuths();
  prof.zenith = grid.zeniths();
  const Eigen::Index n_az = prof.n_az(), n_zen = prof.n_zen();
  CMatrix steering(ppg, n_az * n_zen);
  for (Eigen::Index i = 0; i < n_zen; ++i)
    for (Eigen::Index j = 0; j < n_az; ++j)
      steering.col(i * n_az + j) =
          port_steering_vector(bs, prof.azimuth[static_cast<std::size_t>(j)], prof.zenith[static_cast<std::size_t>(i)])
              .head(ppg);
  const RVector p = parallel ? kernels::bartlett_omp(steering, root) : kernels::bartlett_serial(steering, root);
  const double pmax = p.size() > 0 ? p.maxCoeff() : 0.0;
  prof.power_db.resize(n_zen, n_az);
  for (Eigen::Index i = 0; i < n_zen; ++i)
    for (Eigen::Index j = 0; j < n_az; ++j) {
      const double v = p[i * n_az + j];
      prof.power_db(i, j) = pmax > 0.0 ? (v == pmax ? 0.0 : lin2db(std::max(v / pmax, 1e-30))) : 0.0;
    }
  return prof;
}

ClusterEstimate detect_clusters(const AngularProfile& prof, const DetectOptions& opts) {
  if (!(opts.threshold_db < 0.0)) throw std::invalid_argument("detect_clusters: threshold_db must be < 0");
  const int nz = prof.n_zen(), na = prof.n_az();
  const auto& P = prof.power_db;
  auto idx = [na](int i, int j) { return i * na + j; };

  // Steepest ascent pointers; a cell pointing at itself is a local maximum.
  // Ties go to the lower raster index so plateaus yield one maximum.
  std::vector<int> up(static_cast<std::size_t>(nz * na));
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < na; ++j) {
      int best = idx(i, j);
      double bv = P(i, j);
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const int ii = i + di, jj = j + dj;
          if ((di == 0 && dj == 0) || ii < 0 || jj < 0 || ii >= nz || jj >= na) continue;
          const double v = P(ii, jj);
          if (v > bv || (v == bv && idx(ii, jj) < best)) {
            bv = v;
            best = idx(ii, jj);
          }
        }
      up[static_cast<std::size_t>(idx(i, j))] = best;
    }

  std::vector<int> maxima;
  for (int k = 0; k < nz * na; ++k)
    if (up[static_cast<std::size_t>(k)] == k) maxima.push_back(k);
  std::stable_sort(maxima.begin(), maxima.end(),
                   [&](int a, int b) { return P(a / na, a % na) > P(b / na, b % na); });

  ClusterEstimate est;
  std::vector<int> owner(static_cast<std::size_t>(nz * na), -1);  // for local maxima
  for (int k : maxima) {
    const int i = k / na, j = k % na;
    const double az = prof.azimuth[static_cast<std::size_t>(j)], zen = prof.zenith[static_cast<std::size_t>(i)];
    int near = -1;
    double near_d = 1e300;
    for (std::size_t c = 0; c < est.clusters.size(); ++c) {
      const double d = angular_distance(az, zen, est.clusters[c].azimuth, est.clusters[c].zenith);
      if (d < near_d) {
        near_d = d;
        near = static_cast<int>(c);
      }
    }
    if (near >= 0 && near_d < opts.min_separation) {
      owner[static_cast<std::size_t>(k)] = near;
      continue;
    }
    if (P(i, j) < opts.threshold_db) continue;
    ClusterPeak peak;
    peak.azimuth = az;
    peak.zenith = zen;
    peak.power_db = P(i, j);
    peak.az_index = j;
    peak.zen_index = i;
    owner[static_cast<std::size_t>(k)] = static_cast<int>(est.clusters.size());
    est.clusters.push_back(peak);
  }

  est.label.assign(static_cast<std::size_t>(nz * na), -1);
  for (int k = 0; k < nz * na; ++k) {
    int r = k;
    while (up[static_cast<std::size_t>(r)] != r) r = up[static_cast<std::size_t>(r)];
    const int c = owner[static_cast<std::size_t>(r)];
    if (c < 0) continue;
    ClusterPeak& peak = est.clusters[static_cast<std::size_t>(c)];
    if (P(k / na, k % na) < peak.power_db + opts.region_db) continue;
    est.label[static_cast<std::size_t>(k)] = c;
    peak.region.emplace_back(k / na, k % na);
  }
  return est;
}

LayerBeamMap associate_layers(const Precoder& precoder, const Codebook& codebook, const ClusterEstimate& clusters,
                              const AngularProfile& prof, double max_distance) {
  if (precoder.beam_ids.size() != static_cast<std::size_t>(precoder.n_layers()))
    throw std::invalid_argument("associate_layers: precoder carries no beam ids");
  LayerBeamMap map;
  for (int l = 0; l < precoder.n_layers(); ++l) {
    LayerBeam lb;
    lb.layer = l;
    lb.beam_id = precoder.beam_ids[static_cast<std::size_t>(l)];
    lb.group = l < static_cast<int>(precoder.beam_groups.size()) ? precoder.beam_groups[static_cast<std::size_t>(l)] : -1;
    if (lb.beam_id < 0 || lb.beam_id >= codebook.n_beams())
      throw std::invalid_argument("associate_layers: beam id outside the codebook");
    const BeamAngle& ang = codebook.beam_angles[static_cast<std::size_t>(lb.beam_id)];
    lb.azimuth = ang.azimuth;
    lb.zenith = ang.zenith;
    lb.visible = ang.visible;
    if (lb.visible && prof.n_az() > 0 && prof.n_zen() > 0) {
      const double az_step = prof.n_az() > 1 ? prof.azimuth[1] - prof.azimuth[0] : 1.0;
      const double zen_step = prof.n_zen() > 1 ? prof.zenith[1] - prof.zenith[0] : 1.0;
      const long j = std::lround((lb.azimuth - prof.azimuth.front()) / az_step);
      const long i = std::lround((lb.zenith - prof.zenith.front()) / zen_step);
      if (i >= 0 && j >= 0 && i < prof.n_zen() && j < prof.n_az())
        lb.cluster = clusters.label[static_cast<std::size_t>(i * prof.n_az() + j)];
      if (lb.cluster < 0) {
        double best = max_distance;
        for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
          const double d =
              angular_distance(lb.azimuth, lb.zenith, clusters.clusters[c].azimuth, clusters.clusters[c].zenith);
          if (d <= best) {
            best = d;
            lb.cluster = static_cast<int>(c);
          }
        }
      }
    }
    map.layers.push_back(lb);
  }
  return map;
}

std::string heatmap_csv(const AngularProfile& prof) {
  std::string s = "zenith\\azimuth";
  for (double a : prof.azimuth) s += "," + fmt9(a);
  s += "\n";
  for (int i = 0; i < prof.n_zen(); ++i) {
    s += fmt9(prof.zenith[static_cast<std::size_t>(i)]);
    for (int j = 0; j < prof.n_az(); ++j) s += "," + fmt9(prof.power_db(i, j));
    s += "\n";
  }
  return s;
}

void export_heatmap(const AngularProfile& prof, const std::string& path) { write_text_atomic(path, heatmap_csv(prof)); }

AngularProfile import_heatmap(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  auto cells = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) out.push_back(c);
    return out;
  };
  auto num = [&path](const std::string& c, int ln) {
    char* end = nullptr;
    const double v = std::strtod(c.c_str(), &end);
    if (c.empty() || end != c.c_str() + c.size()) throw ConfigError(path + ":" + std::to_string(ln) + ": bad number \"" + c + "\"");
    return v;
  };
  AngularProfile prof;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty heatmap");
  const std::vector<std::string> head = cells(line);
  if (head.empty() || head[0] != "zenith\\azimuth") throw ConfigError(path + ":1: expected corner cell zenith\\azimuth");
  for (std::size_t k = 1; k < head.size(); ++k) prof.azimuth.push_back(num(head[k], 1));
  std::vector<std::vector<double>> rows;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    const std::vector<std::string> c = cells(line);
    if (c.size() != head.size()) throw ConfigError(path + ":" + std::to_string(ln) + ": row width differs from header");
    prof.zenith.push_back(num(c[0], ln));
    std::vector<double> r;
    for (std::size_t k = 1; k < c.size(); ++k) r.push_back(num(c[k], ln));
    rows.push_back(std::move(r));
  }
  prof.power_db.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(prof.azimuth.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      prof.power_db(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return prof;
}

std::string beams_csv(const LayerBeamMap& map) {
  std::string s = "layer,beam_id,group,azimuth_deg,zenith_deg,visible\n";
  for (const LayerBeam& b : map.layers)
    s += std::to_string(b.layer + 1) + "," + std::to_string(b.beam_id) + "," + std::to_string(b.group) + "," +
         fmt9(b.azimuth) + "," + fmt9(b.zenith) + "," + (b.visible ? "1" : "0") + "\n";
  return s;
}

std::string clusters_csv(const ClusterEstimate& est) {
  std::string s = "cluster,azimuth_deg,zenith_deg,power_db,region_cells\n";
  for (std::size_t c = 0; c < est.clusters.size(); ++c) {
    const ClusterPeak& p = est.clusters[c];
    s += std::to_string(c + 1) + "," + fmt9(p.azimuth) + "," + fmt9(p.zenith) + "," + fmt9(p.power_db) + "," +
         std::to_string(p.region.size()) + "\n";
  }
  return s;
}

std::string association_csv(const LayerBeamMap& map) {
  std::string s = "layer,beam_id,azimuth_deg,zenith_deg,cluster\n";
  for (const LayerBeam& b : map.layers)
    s += std::to_string(b.layer + 1) + "," + std::to_string(b.beam_id) + "," + fmt9(b.azimuth) + "," +
         fmt9(b.zenith) + "," + (b.cluster < 0 ? std::string("none") : std::to_string(b.cluster + 1)) + "\n";
  return s;
}

AnalysisResult analyze_link(const LinkDump& dump, const AnalyzeOptions& opts) {
  const ArrayGeometry bs = build_array(dump.bs);
  AnalysisResult res;
  res.profile = power_angular_profile(dump.h, bs, opts.grid, opts.parallel);
  res.clusters = detect_clusters(res.profile, opts.detect);
  const Codebook cb = dft_codebook(bs, opts.o1, opts.o2);
  if (dump.precoder && dump.precoder->beam_ids.size() == static_cast<std::size_t>(dump.precoder->n_layers()) &&
      std::all_of(dump.precoder->beam_ids.begin(), dump.precoder->beam_ids.end(), [](int b) { return b >= 0; })) {
    res.precoder = *dump.precoder;
  } else {
    res.precoder = dft_beam_assignment(std::span<const CMatrix>(dump.h), cb, bs.n_groups(),
                                       std::min(opts.n_layers, bs.n_ports()));
  }
  res.layers = associate_layers(res.precoder, cb, res.clusters, res.profile, opts.max_distance);
  return res;
}

std::vector<std::string> write_analysis(const std::string& dir, const AnalysisResult& r) {
  const std::filesystem::path d(dir);
  write_text_atomic((d / "heatmap.csv").string(), heatmap_csv(r.profile));
  write_text_atomic((d / "beams.csv").string(), beams_csv(r.layers));
  write_text_atomic((d / "clusters.csv").string(), clusters_csv(r.clusters));
  write_text_atomic((d / "association.csv").string(), association_csv(r.layers));
  return {"heatmap.csv", "beams.csv", "clusters.csv", "association.csv"};
}

ClusterSet synthetic_cluster_set(const std::vector<SyntheticCluster>& scene, std::uint64_t seed, double xpr_db) {
  ClusterSet set;
  set.xpr_db = xpr_db;
  set.pathloss_db = 0.0;
  set.shadowing_db = 0.0;
  Rng rng(seed, "clusters");
  Rng prng(seed, "phases");
  auto random_phase = [&prng]() { return std::polar(1.0, 2.0 * kPi * prng.uniform()); };
  const double s = std::sqrt(1.0 / db2lin(xpr_db));
  double total = 0.0;
  for (const SyntheticCluster& c : scene) total += db2lin(c.power_db);
  for (const SyntheticCluster& sc : scene) {
    if (sc.n_rays < 1) throw std::invalid_argument("synthetic_cluster_set: n_rays must be >= 1");
    const double power = db2lin(sc.power_db) / total;
    std::vector<double> off(static_cast<std::size_t>(sc.n_rays), 0.0), w(off.size(), 1.0);
    double wsum = 0.0;
    for (int m = 0; m < sc.n_rays; ++m) {
      if (sc.n_rays > 1 && sc.spread > 0.0) {
        const double x = -2.0 + 4.0 * m / (sc.n_rays - 1);
        off[static_cast<std::size_t>(m)] = sc.spread * x;
        w[static_cast<std::size_t>(m)] = std::exp(-0.5 * x * x);
      }
      wsum += w[static_cast<std::size_t>(m)];
    }
    for (int m = 0; m < sc.n_rays; ++m) {
      Cluster c;
      c.power = power * w[static_cast<std::size_t>(m)] / wsum;
      c.delay = sc.delay + (sc.n_rays > 1 ? sc.delay_spread * m / (sc.n_rays - 1) : 0.0);
      c.aod = sc.aod + off[static_cast<std::size_t>(m)];
      c.zod = std::clamp(sc.zod, 1e-6, 180.0 - 1e-6);
      c.aoa = rng.uniform(-60.0, 60.0);
      c.zoa = rng.uniform(70.0, 110.0);
      Ray r;
      r.aod = c.aod;
      r.zod = c.zod;
      r.aoa = c.aoa;
      r.zoa = c.zoa;
      r.power = c.power;
      r.xpol = {random_phase(), s * random_phase(), s * random_phase(), random_phase()};
      c.rays.push_back(r);
      set.clusters.push_back(std::move(c));
    }
  }
  std::stable_sort(set.clusters.begin(), set.clusters.end(),
                   [](const Cluster& a, const Cluster& b) { return a.delay < b.delay; });
  return set;
}

std::vector<SyntheticCluster> synthetic_scene(const std::string& name) {
  if (name == "two") return {{-20.0, 96.0, 0.0, 0.0, 3.0, 8, 30e-9}, {20.0, 96.0, -6.0, 300e-9, 0.5, 8, 30e-9}};
  if (name == "one") return {{0.0, 96.0, 0.0, 0.0, 10.0, 8, 200e-9}};
  throw ConfigError("synthetic scene must be \"two\" or \"one\", got \"" + name + "\"");
}

LinkDump synthetic_link_dump(const std::vector<SyntheticCluster>& scene, std::uint64_t seed,
                             const std::string& bs_preset, int n_rb) {
  LinkDump d;
  d.link_id = "synthetic";
  d.bs_array = bs_preset;
  d.bs = array_preset(bs_preset);
  const ArrayGeometry bs = build_array(d.bs);
  const ArrayGeometry ue = build_array(array_preset("ue8"));
  const ClusterSet set = synthetic_cluster_set(scene, seed);
  const ChannelMatrix h = channel_matrix(set, bs, ue, n_rb, d.rb_bandwidth);
  d.n_rx = ue.n_ports();
  d.n_tx = bs.n_ports();
  d.carrier = d.bs.carrier_freq;
  d.large_scale_gain_db = h.large_scale_gain_db;
  d.h = h.rb;
  double total = 0.0;
  for (const SyntheticCluster& c : scene) total += db2lin(c.power_db);
  for (const SyntheticCluster& sc : scene) {
    Cluster c;
    c.power = db2lin(sc.power_db) / total;
    c.delay = sc.delay;
    c.aod = sc.aod;
    c.zod = sc.zod;
    d.clusters.push_back(c);
  }
  return d;
}

}  // namespace xmimo
