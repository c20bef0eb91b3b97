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

#include "xmimo/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xmimo/kernels.hpp"
#include "xmimo/rng.hpp"

namespace xmimo {

namespace {

double wrap_azimuth(double deg) { return std::remainder(deg, 360.0); }

// Folds a zenith back into [0, 180], mirroring the azimuth when needed.
void fold_angles(double& az, double& zen) {
  zen = std::remainder(zen, 360.0);
  if (zen < 0.0) {
    zen = -zen;
    az += 180.0;
  }
  az = wrap_azimuth(az);
}

}  // namespace

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

void NetworkLayout::validate() const {
  if (n_sites != 1 && n_sites != 7) throw ConfigError("layout.n_sites must be 1 or 7");
  if (sectors_per_site != 1 && sectors_per_site != 3)
    throw ConfigError("layout.sectors_per_site must be 1 or 3");
  if (!(isd > 0.0)) throw ConfigError("isd must be > 0");
  if (!(bs_height > ue_height)) throw ConfigError("layout.bs_height must exceed layout.ue_height");
  if (!(ue_height > 0.0)) throw ConfigError("layout.ue_height must be > 0");
  if (min_bs_ue_dist_2d < 0.0) throw ConfigError("layout.min_bs_ue_dist_2d must be >= 0");
}

std::vector<Eigen::Vector2d> site_positions(const NetworkLayout& layout) {
  std::vector<Eigen::Vector2d> out{Eigen::Vector2d::Zero()};
  if (layout.n_sites == 7)
    for (int k = 0; k < 6; ++k) {
      const double a = deg2rad(60.0 * k);
      out.emplace_back(layout.isd * std::cos(a), layout.isd * std::sin(a));
    }
  return out;
}

std::vector<CellInfo> cell_list(const NetworkLayout& layout) {
  std::vector<CellInfo> out;
  for (int s = 0; s < layout.n_sites; ++s)
    for (int k = 0; k < layout.sectors_per_site; ++k) {
      CellInfo c;
      c.id = static_cast<int>(out.size());
      c.site = s;
      c.boresight = layout.sectors_per_site == 3 ? wrap_azimuth(30.0 + 120.0 * k) : 0.0;
      out.push_back(c);
    }
  return out;
}

Eigen::Vector2d site_to_ue(const NetworkLayout& layout, const Eigen::Vector2d& site,
                           const Eigen::Vector2d& ue) {
  Eigen::Vector2d best = ue - site;
  if (!layout.wraparound || layout.n_sites != 7) return best;
  // Translation vectors of the 7-site cluster tiling.
  const double d = layout.isd;
  const Eigen::Vector2d s1(2.5 * d, 0.5 * std::sqrt(3.0) * d);
  const Eigen::Vector2d s2(0.5 * d, 1.5 * std::sqrt(3.0) * d);
  const std::array<Eigen::Vector2d, 6> shifts{s1, s2, s2 - s1, -s1, -s2, s1 - s2};
  for (const auto& sh : shifts) {
    const Eigen::Vector2d cand = ue - (site + sh);
    if (cand.squaredNorm() < best.squaredNorm()) best = cand;
  }
  return best;
}

LinkGeometry link_geometry(const NetworkLayout& layout, const CellInfo& cell,
                           const Eigen::Vector2d& site, const Eigen::Vector2d& ue_pos,
                           double ue_orientation) {
  const Eigen::Vector2d d = site_to_ue(layout, site, ue_pos);
  LinkGeometry g;
  const double dh = layout.bs_height - layout.ue_height;
  g.d2d = std::max(d.norm(), 1e-3);
  g.d3d = std::hypot(g.d2d, dh);
  const double bearing = rad2deg(std::atan2(d.y(), d.x()));
  g.aod = wrap_azimuth(bearing - cell.boresight);
  g.zod = 90.0 + rad2deg(std::atan2(dh, g.d2d));
  g.aoa = wrap_azimuth(bearing + 180.0 - ue_orientation);
  g.zoa = 180.0 - g.zod;
  return g;
}

// ---------------------------------------------------------------------------
// Path loss
// ---------------------------------------------------------------------------

double pathloss(double d2d, double d3d, double fc, bool los, const NetworkLayout& layout) {
  const double f_ghz = fc / 1e9;
  const double h_bs = layout.bs_height, h_ut = layout.ue_height;
  const double d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc / kSpeedOfLight;
  double pl_los;
  if (d2d <= d_bp)
    pl_los = 28.0 + 22.0 * std::log10(d3d) + 20.0 * std::log10(f_ghz);
  else
    pl_los = 28.0 + 40.0 * std::log10(d3d) + 20.0 * std::log10(f_ghz) -
             9.0 * std::log10(d_bp * d_bp + (h_bs - h_ut) * (h_bs - h_ut));
  if (los) return pl_los;
  const double pl_nlos = 13.54 + 39.08 * std::log10(d3d) + 20.0 * std::log10(f_ghz) - 0.6 * (h_ut - 1.5);
  return std::max(pl_los, pl_nlos);
}

double los_probability(double d2d) {
  if (d2d <= 18.0) return 1.0;
  return 18.0 / d2d + std::exp(-d2d / 63.0) * (1.0 - 18.0 / d2d);
}

// ---------------------------------------------------------------------------
// Drops
// ---------------------------------------------------------------------------

Drop drop_ues(const NetworkLayout& layout, int ues_per_cell, std::uint64_t seed,
              const ArrayConfig& bs) {
  layout.validate();
  if (ues_per_cell < 1) throw ConfigError("ues_per_cell must be >= 1");
  const double r_hex = layout.isd / std::sqrt(3.0);
  // With one sector per site the UE is confined to a 120-degree wedge anyway
  // (the panel boresight +/- 60), so the same area test applies.
  if (layout.min_bs_ue_dist_2d >= r_hex)
    throw ConfigError("layout.min_bs_ue_dist_2d leaves no cell area at this isd");

  const auto sites = site_positions(layout);
  const auto cells = cell_list(layout);
  Rng rng(seed, "drop");
  Drop drop;

  for (const CellInfo& cell : cells) {
    const Eigen::Vector2d& site = sites[static_cast<std::size_t>(cell.site)];
    for (int i = 0; i < ues_per_cell; ++i) {
      Eigen::Vector2d p;
      for (int attempt = 0;; ++attempt) {
        if (attempt > 100000) throw std::runtime_error("drop_ues: rejection sampling did not converge");
        p = Eigen::Vector2d(rng.uniform(-r_hex, r_hex), rng.uniform(-r_hex, r_hex));
        bool inside = p.norm() >= layout.min_bs_ue_dist_2d;
        for (int k = 0; k < 6 && inside; ++k) {
          const double a = deg2rad(60.0 * k);
          inside = p.x() * std::cos(a) + p.y() * std::sin(a) <= 0.5 * layout.isd;
        }
        if (!inside) continue;
        const double rel = wrap_azimuth(rad2deg(std::atan2(p.y(), p.x())) - cell.boresight);
        if (std::abs(rel) < 60.0) break;
      }
      UePlacement ue;
      ue.id = static_cast<int>(drop.ues.size());
      ue.position = site + p;
      ue.home_cell = cell.id;
      ue.orientation = rng.uniform(-180.0, 180.0);
      drop.ues.push_back(ue);
    }
  }

  const ChannelParams los_p = uma_channel_params(true, bs.carrier_freq);
  const ChannelParams nlos_p = uma_channel_params(false, bs.carrier_freq);
  const std::size_t n_ue = drop.ues.size();
  drop.los.assign(n_ue, std::vector<char>(sites.size(), 0));
  drop.shadowing_db.assign(n_ue, std::vector<double>(sites.size(), 0.0));
  drop.coupling_db.assign(n_ue, std::vector<double>(cells.size(), 0.0));
  for (std::size_t u = 0; u < n_ue; ++u) {
    UePlacement& ue = drop.ues[u];
    for (std::size_t s = 0; s < sites.size(); ++s) {
      Rng srng(seed, "shadowing", {u, s});
      const double d2d = site_to_ue(layout, sites[s], ue.position).norm();
      const bool los = srng.uniform() < los_probability(d2d);
      drop.los[u][s] = los;
      drop.shadowing_db[u][s] = srng.normal(0.0, los ? los_p.shadowing_std_los : nlos_p.shadowing_std_nlos);
    }
    double best = -1e300;
    for (const CellInfo& cell : cells) {
      const auto s = static_cast<std::size_t>(cell.site);
      const LinkGeometry g = link_geometry(layout, cell, sites[s], ue.position, ue.orientation);
      const double c = -pathloss(g.d2d, g.d3d, bs.carrier_freq, drop.los[u][s], layout) -
                       drop.shadowing_db[u][s] + element_pattern_gain(g.aod, g.zod, bs);
      drop.coupling_db[u][static_cast<std::size_t>(cell.id)] = c;
      if (c > best) {
        best = c;
        ue.serving_cell = cell.id;
      }
    }
  }
  return drop;
}

// ---------------------------------------------------------------------------
// Clusters
// ---------------------------------------------------------------------------

void ChannelParams::validate() const {
  if (n_clusters < 1) throw ConfigError("channel.n_clusters must be >= 1");
  if (rays_per_cluster < 1) throw ConfigError("channel.rays_per_cluster must be >= 1");
  if (!(delay_spread > 0.0)) throw ConfigError("channel.delay_spread must be > 0");
  if (!(asd > 0.0 && zsd > 0.0 && asa > 0.0 && zsa > 0.0))
    throw ConfigError("channel angular spreads must be > 0");
  if (c_asd < 0.0 || c_zsd < 0.0 || c_asa < 0.0 || c_zsa < 0.0)
    throw ConfigError("channel intra-cluster spreads must be >= 0");
}

ChannelParams uma_channel_params(bool los, double fc) {
  const double lf = std::log10(fc / 1e9);
  ChannelParams p;
  if (los) {
    p.delay_spread = std::pow(10.0, -6.955 - 0.0963 * lf);
    p.delay_scaling = 2.5;
    p.asd = std::pow(10.0, 1.06 + 0.1114 * lf);
    p.asa = std::pow(10.0, 1.81);
    p.zsa = std::pow(10.0, 0.95);
    p.zsd = 2.0;
    p.c_asd = 5.0;
    p.c_asa = 11.0;
  } else {
    p.delay_spread = std::pow(10.0, -6.28 - 0.204 * lf);
    p.delay_scaling = 2.3;
    p.asd = std::pow(10.0, 1.5 - 0.1144 * lf);
    p.asa = std::pow(10.0, 2.08 - 0.27 * lf);
    p.zsa = std::pow(10.0, 1.512 - 0.3236 * lf);
    p.zsd = 3.0;
    p.c_asd = 2.0;
    p.c_asa = 15.0;
  }
  p.c_zsa = 7.0;
  p.c_zsd = 0.375 * p.zsd;
  return p;
}

namespace {

// Scaling factors relating cluster count to the rms angular spread.
double c_phi_nlos(int n) {
  static const std::array<std::pair<int, double>, 11> table{
      {{4, 0.779}, {5, 0.860}, {8, 1.018}, {10, 1.090}, {11, 1.123}, {12, 1.146},
       {14, 1.190}, {15, 1.211}, {16, 1.226}, {19, 1.273}, {20, 1.289}}};
  if (n <= table.front().first) return table.front().second;
  for (std::size_t i = 1; i < table.size(); ++i)
    if (n <= table[i].first) {
      const auto [n0, c0] = table[i - 1];
      const auto [n1, c1] = table[i];
      return c0 + (c1 - c0) * (n - n0) / static_cast<double>(n1 - n0);
    }
  return table.back().second;
}

double c_theta_nlos(int n) {
  static const std::array<std::pair<int, double>, 7> table{
      {{8, 0.889}, {10, 0.957}, {11, 1.031}, {12, 1.104}, {15, 1.1088}, {19, 1.184}, {20, 1.178}}};
  if (n <= table.front().first) return table.front().second;
  for (std::size_t i = 1; i < table.size(); ++i)
    if (n <= table[i].first) {
      const auto [n0, c0] = table[i - 1];
      const auto [n1, c1] = table[i];
      return c0 + (c1 - c0) * (n - n0) / static_cast<double>(n1 - n0);
    }
  return table.back().second;
}

}  // namespace

ClusterSet generate_clusters(const LinkGeometry& link, const ChannelParams& params, bool los,
                             std::uint64_t seed) {
  params.validate();
  Rng crng(seed, "clusters");
  Rng prng(seed, "phases");
  ClusterSet set;
  set.los = los;
  set.xpr_db = params.xpr_db;

  const int n_scat = los ? std::max(params.n_clusters - 1, 1) : params.n_clusters;
  double k_lin = 0.0;
  if (los) {
    set.k_factor_db = crng.normal(params.rician_k_db_mean, params.rician_k_db_std);
    k_lin = db2lin(set.k_factor_db);
  }

  // Exponential delay profile.
  std::vector<double> delays(static_cast<std::size_t>(n_scat));
  for (double& t : delays) t = -params.delay_scaling * params.delay_spread * std::log(crng.uniform_open());
  const double t_min = *std::min_element(delays.begin(), delays.end());
  for (double& t : delays) t -= t_min;
  std::sort(delays.begin(), delays.end());

  std::vector<double> powers(delays.size());
  for (std::size_t n = 0; n < delays.size(); ++n) {
    const double z = crng.normal(0.0, params.cluster_shadowing_db);
    powers[n] = std::exp(-delays[n] * (params.delay_scaling - 1.0) /
                         (params.delay_scaling * params.delay_spread)) *
                std::pow(10.0, -z / 10.0);
  }
  const double p_sum = std::accumulate(powers.begin(), powers.end(), 0.0);
  for (double& p : powers) p /= p_sum;
  const double p_max = *std::max_element(powers.begin(), powers.end());
  const auto strongest = static_cast<std::size_t>(std::max_element(powers.begin(), powers.end()) - powers.begin());

  double c_phi = c_phi_nlos(n_scat);
  double c_theta = c_theta_nlos(n_scat);
  if (los) {
    const double k = set.k_factor_db;
    c_phi *= 1.1035 - 0.028 * k - 0.002 * k * k + 0.0001 * k * k * k;
    c_theta *= 1.3086 + 0.0339 * k - 0.0077 * k * k + 0.0002 * k * k * k;
    c_phi = std::max(c_phi, 0.1);
    c_theta = std::max(c_theta, 0.1);
  }

  struct Offsets {
    double aoa, aod, zoa, zod;
  };
  std::vector<Offsets> off(delays.size());
  for (std::size_t n = 0; n < delays.size(); ++n) {
    const double rel = std::max(powers[n] / p_max, 1e-12);
    const double phi_a = 2.0 * (params.asa / 1.4) * std::sqrt(-std::log(rel)) / c_phi;
    const double phi_d = 2.0 * (params.asd / 1.4) * std::sqrt(-std::log(rel)) / c_phi;
    const double th_a = -params.zsa * std::log(rel) / c_theta;
    const double th_d = -params.zsd * std::log(rel) / c_theta;
    auto sign = [&] { return crng.uniform() < 0.5 ? -1.0 : 1.0; };
    off[n].aoa = sign() * phi_a + crng.normal(0.0, params.asa / 7.0);
    off[n].aod = sign() * phi_d + crng.normal(0.0, params.asd / 7.0);
    off[n].zoa = sign() * th_a + crng.normal(0.0, params.zsa / 7.0);
    off[n].zod = sign() * th_d + crng.normal(0.0, params.zsd / 7.0);
  }
  // Under LOS the strongest scattered cluster is centred on the direct path.
  const Offsets anchor = los ? off[strongest] : Offsets{0.0, 0.0, 0.0, 0.0};

  const double s = std::sqrt(1.0 / db2lin(params.xpr_db));
  auto random_phase = [&] { return std::polar(1.0, prng.uniform(-kPi, kPi)); };

  if (los) {
    Cluster c;
    c.power = k_lin / (k_lin + 1.0);
    c.delay = 0.0;
    c.aod = link.aod;
    c.zod = link.zod;
    c.aoa = link.aoa;
    c.zoa = link.zoa;
    Ray r;
    r.aod = c.aod;
    r.zod = c.zod;
    r.aoa = c.aoa;
    r.zoa = c.zoa;
    r.power = c.power;
    const cdouble ph = random_phase();
    r.xpol = {ph, 0.0, 0.0, -ph};
    c.rays.push_back(r);
    set.clusters.push_back(std::move(c));
  }

  const double scat_share = los ? 1.0 / (k_lin + 1.0) : 1.0;
  const int m = params.rays_per_cluster;
  for (std::size_t n = 0; n < delays.size(); ++n) {
    Cluster c;
    c.power = powers[n] * scat_share;
    c.delay = delays[n];
    c.aoa = link.aoa + off[n].aoa - anchor.aoa;
    c.aod = link.aod + off[n].aod - anchor.aod;
    c.zoa = link.zoa + off[n].zoa - anchor.zoa;
    c.zod = link.zod + off[n].zod - anchor.zod;
    fold_angles(c.aoa, c.zoa);
    fold_angles(c.aod, c.zod);
    for (int i = 0; i < m; ++i) {
      Ray r;
      r.aod = c.aod + crng.normal(0.0, params.c_asd);
      r.zod = c.zod + crng.normal(0.0, params.c_zsd);
      r.aoa = c.aoa + crng.normal(0.0, params.c_asa);
      r.zoa = c.zoa + crng.normal(0.0, params.c_zsa);
      fold_angles(r.aod, r.zod);
      fold_angles(r.aoa, r.zoa);
      r.power = c.power / m;
      r.xpol = {random_phase(), s * random_phase(), s * random_phase(), random_phase()};
      c.rays.push_back(r);
    }
    set.clusters.push_back(std::move(c));
  }
  // Keep zenith strictly inside (0, 180) for steering evaluation.
  for (Cluster& c : set.clusters)
    for (Ray& r : c.rays) {
      r.zod = std::clamp(r.zod, 1e-6, 180.0 - 1e-6);
      r.zoa = std::clamp(r.zoa, 1e-6, 180.0 - 1e-6);
    }
  return set;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

namespace {

std::array<double, 2> slant_components(double slant_deg) {
  const double z = deg2rad(slant_deg);
  return {std::cos(z), std::sin(z)};
}

}  // namespace

ClusterChannel cluster_channel(const ClusterSet& clusters, const ArrayGeometry& bs,
                               const ArrayGeometry& ue) {
  const int n_rx = ue.n_ports(), n_tx = bs.n_ports();
  const double lin_ls = db2lin(-clusters.pathloss_db - clusters.shadowing_db);
  const double s2 = 1.0 / db2lin(clusters.xpr_db);

  // Polarization slants per port group.
  std::vector<std::array<double, 2>> f_rx(static_cast<std::size_t>(ue.n_groups()));
  std::vector<std::array<double, 2>> f_tx(static_cast<std::size_t>(bs.n_groups()));
  for (int g = 0; g < ue.n_groups(); ++g) f_rx[g] = slant_components(ue.port_slant(g * ue.ports_per_group()));
  for (int g = 0; g < bs.n_groups(); ++g) f_tx[g] = slant_components(bs.port_slant(g * bs.ports_per_group()));

  ClusterChannel out;
  double expected = 0.0;
  for (const Cluster& c : clusters.clusters) {
    CMatrix gm = CMatrix::Zero(n_rx, n_tx);
    for (const Ray& r : c.rays) {
      const bool specular = r.xpol[1] == 0.0 && r.xpol[2] == 0.0;
      const double g_tx = db2lin(element_pattern_gain(r.aod, r.zod, bs.config));
      const double g_rx = db2lin(element_pattern_gain(r.aoa, r.zoa, ue.config));
      const CVector a_tx = port_steering_vector(bs, r.aod, r.zod);
      const CVector a_rx = port_steering_vector(ue, r.aoa, r.zoa);
      const double amp = std::sqrt(lin_ls * r.power * g_tx * g_rx);
      expected += r.power * g_tx * g_rx * std::norm(a_tx[0]) * std::norm(a_rx[0]);
      for (int gr = 0; gr < ue.n_groups(); ++gr) {
        for (int gt = 0; gt < bs.n_groups(); ++gt) {
          const auto& fr = f_rx[gr];
          const auto& ft = f_tx[gt];
          const cdouble c_raw = fr[0] * (r.xpol[0] * ft[0] + r.xpol[1] * ft[1]) +
                                fr[1] * (r.xpol[2] * ft[0] + r.xpol[3] * ft[1]);
          // Unit mean coupling power for this pair of slants.
          const double xs = specular ? 0.0 : s2;
          const double e_pair = fr[0] * fr[0] * ft[0] * ft[0] + xs * fr[0] * fr[0] * ft[1] * ft[1] +
                                xs * fr[1] * fr[1] * ft[0] * ft[0] + fr[1] * fr[1] * ft[1] * ft[1];
          const cdouble coupling = e_pair > 0.0 ? c_raw / std::sqrt(e_pair) : cdouble{};
          const int r0 = gr * ue.ports_per_group(), c0 = gt * bs.ports_per_group();
          gm.block(r0, c0, ue.ports_per_group(), bs.ports_per_group()).noalias() +=
              (amp * coupling) * a_rx.segment(r0, ue.ports_per_group()) *
              a_tx.segment(c0, bs.ports_per_group()).adjoint();
        }
      }
    }
    out.cluster_matrices.push_back(std::move(gm));
    out.delays.push_back(c.delay);
  }
  out.large_scale_gain_db = lin2db(lin_ls * std::max(expected, 1e-300));
  return out;
}

double rb_center_offset(int rb, int n_rbs, double rb_bandwidth) {
  return (rb + 0.5 - 0.5 * n_rbs) * rb_bandwidth;
}

CMatrix delay_phasors(const std::vector<double>& delays, int n_rbs, double rb_bandwidth) {
  CMatrix ph(static_cast<Eigen::Index>(delays.size()), n_rbs);
  for (int rb = 0; rb < n_rbs; ++rb) {
    const double f = rb_center_offset(rb, n_rbs, rb_bandwidth);
    for (std::size_t n = 0; n < delays.size(); ++n)
      ph(static_cast<Eigen::Index>(n), rb) = std::polar(1.0, -2.0 * kPi * f * delays[n]);
  }
  return ph;
}

ChannelMatrix channel_matrix(const ClusterSet& clusters, const ArrayGeometry& bs,
                             const ArrayGeometry& ue, int n_rbs, double rb_bandwidth) {
  if (n_rbs < 1) throw std::invalid_argument("channel_matrix: n_rbs must be >= 1");
  const ClusterChannel cc = cluster_channel(clusters, bs, ue);
  ChannelMatrix h;
  h.rb_bandwidth = rb_bandwidth;
  h.large_scale_gain_db = cc.large_scale_gain_db;
  h.rb = kernels::synthesize_rbs_omp(cc.cluster_matrices, delay_phasors(cc.delays, n_rbs, rb_bandwidth));
  return h;
}

}  // namespace xmimo
