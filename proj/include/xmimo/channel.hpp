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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "xmimo/arrays.hpp"
#include "xmimo/common.hpp"

namespace xmimo {

// ---------------------------------------------------------------------------
// Network layout and drops
// ---------------------------------------------------------------------------

struct NetworkLayout {
  int n_sites = 7;  // 1 or 7
  int sectors_per_site = 3;
  double isd = 500.0;
  double bs_height = 25.0;
  double ue_height = 1.5;
  double min_bs_ue_dist_2d = 35.0;
  bool wraparound = true;

  int n_cells() const { return n_sites * sectors_per_site; }
  void validate() const;
};

struct CellInfo {
  int id = 0;
  int site = 0;
  double boresight = 0.0;  // degrees, global azimuth of the panel normal
};

std::vector<Eigen::Vector2d> site_positions(const NetworkLayout& layout);
std::vector<CellInfo> cell_list(const NetworkLayout& layout);

/// Displacement from a site to a UE, taken to the nearest wraparound image of
/// the site when the layout wraps.
Eigen::Vector2d site_to_ue(const NetworkLayout& layout, const Eigen::Vector2d& site,
                           const Eigen::Vector2d& ue);

/// Angles and distances of the direct path of one BS-UE link, in the panel
/// frames (AoD relative to the sector boresight, AoA relative to the UE array
/// normal).
struct LinkGeometry {
  double d2d = 0.0;
  double d3d = 0.0;
  double aod = 0.0;
  double zod = 90.0;
  double aoa = 180.0;
  double zoa = 90.0;
};

LinkGeometry link_geometry(const NetworkLayout& layout, const CellInfo& cell,
                           const Eigen::Vector2d& site, const Eigen::Vector2d& ue_pos,
                           double ue_orientation);

struct UePlacement {
  int id = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  int home_cell = 0;     // cell whose area the UE was dropped in
  int serving_cell = 0;  // strongest coupling
  double orientation = 0.0;  // degrees
};

/// Large-scale state of one UE and every site (LOS and shadowing are shared by
/// the sectors of a site) or cell (coupling).
struct Drop {
  std::vector<UePlacement> ues;
  std::vector<std::vector<char>> los;             // [ue][site]
  std::vector<std::vector<double>> shadowing_db;  // [ue][site]
  std::vector<std::vector<double>> coupling_db;   // [ue][cell], -PL - SF + element gain
};

/// Uniform placement in every cell area. `bs` supplies the element pattern
/// and carrier used for the serving-cell decision.
Drop drop_ues(const NetworkLayout& layout, int ues_per_cell, std::uint64_t seed,
              const ArrayConfig& bs = array_preset("x256"));

// ---------------------------------------------------------------------------
// Path loss
// ---------------------------------------------------------------------------

/// UMa path loss in dB; NLOS is max(LOS, NLOS').
double pathloss(double d2d, double d3d, double fc, bool los, const NetworkLayout& layout);

/// UMa LOS probability for UE heights up to 13 m.
double los_probability(double d2d);

// ---------------------------------------------------------------------------
// Clustered channel
// ---------------------------------------------------------------------------

struct ChannelParams {
  int n_clusters = 12;
  int rays_per_cluster = 8;
  double delay_spread = 352e-9;  // seconds
  double delay_scaling = 2.3;
  // Inter-cluster rms spreads (degrees).
  double asd = 25.0, zsd = 3.0, asa = 71.0, zsa = 17.0;
  // Intra-cluster spreads (degrees).
  double c_asd = 2.0, c_zsd = 0.75, c_asa = 15.0, c_zsa = 7.0;
  double cluster_shadowing_db = 3.0;
  double rician_k_db_mean = 9.0;
  double rician_k_db_std = 3.5;
  double xpr_db = 8.0;
  double shadowing_std_los = 4.0;
  double shadowing_std_nlos = 6.0;

  void validate() const;
};

/// UMa-flavoured defaults at the given carrier for the LOS or NLOS state.
ChannelParams uma_channel_params(bool los, double fc);

struct Ray {
  double aod = 0.0, zod = 90.0, aoa = 0.0, zoa = 90.0;  // absolute, panel frames
  double power = 0.0;                                  // share of the link power
  /// Polarization coupling in the (theta, phi) basis, XPR and random phases
  /// applied.
  std::array<cdouble, 4> xpol{};
};

struct Cluster {
  double power = 0.0;
  double delay = 0.0;
  double aod = 0.0, zod = 90.0, aoa = 0.0, zoa = 90.0;
  std::vector<Ray> rays;
};

struct ClusterSet {
  std::vector<Cluster> clusters;  // delays ascending; the LOS specular path first
  bool los = false;
  double k_factor_db = -1e9;
  double pathloss_db = 0.0;
  double shadowing_db = 0.0;
  double xpr_db = 8.0;
};

ClusterSet generate_clusters(const LinkGeometry& link, const ChannelParams& params, bool los,
                             std::uint64_t seed);

/// Cluster-domain form of one link: H(f) = sum_n exp(-j 2 pi f tau_n) G_n.
struct ClusterChannel {
  std::vector<CMatrix> cluster_matrices;  // n_rx x n_tx each
  std::vector<double> delays;
  double large_scale_gain_db = 0.0;

  int n_rx() const { return static_cast<int>(cluster_matrices.front().rows()); }
  int n_tx() const { return static_cast<int>(cluster_matrices.front().cols()); }
};

ClusterChannel cluster_channel(const ClusterSet& clusters, const ArrayGeometry& bs,
                               const ArrayGeometry& ue);

/// Baseband centre frequency of resource-block group `rb`.
double rb_center_offset(int rb, int n_rbs, double rb_bandwidth);

/// Per-RB delay phasors exp(-j 2 pi f_rb tau_n), n_clusters x n_rbs.
CMatrix delay_phasors(const std::vector<double>& delays, int n_rbs, double rb_bandwidth);

struct ChannelMatrix {
  std::string link_id;
  std::vector<CMatrix> rb;  // n_rx x n_tx per RB group
  double rb_bandwidth = 2e6;
  double large_scale_gain_db = 0.0;

  int n_rbs() const { return static_cast<int>(rb.size()); }
  int n_rx() const { return static_cast<int>(rb.front().rows()); }
  int n_tx() const { return static_cast<int>(rb.front().cols()); }
};

ChannelMatrix channel_matrix(const ClusterSet& clusters, const ArrayGeometry& bs,
                             const ArrayGeometry& ue, int n_rbs, double rb_bandwidth = 2e6);

}  // namespace xmimo
