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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xmimo/arrays.hpp"
#include "xmimo/channel.hpp"
#include "xmimo/io.hpp"
#include "xmimo/precoding.hpp"

namespace xmimo {

struct AngleGrid {
  double az_min = -90.0, az_max = 90.0, az_step = 1.0;
  double zen_min = 60.0, zen_max = 120.0, zen_step = 1.0;

  std::vector<double> azimuths() const;
  std::vector<double> zeniths() const;
  void validate() const;
};

/// Bartlett spectrum on an (azimuth, zenith) grid. power_db(i, j) belongs to
/// zenith[i], azimuth[j]; the maximum is exactly 0 dB.
struct AngularProfile {
  std::vector<double> azimuth;
  std::vector<double> zenith;
  RMatrix power_db;

  int n_az() const { return static_cast<int>(azimuth.size()); }
  int n_zen() const { return static_cast<int>(zenith.size()); }
};

/// P(az, zen) = sum_rb sum_rx sum_group |a(az, zen)^H h|^2, where h is the
/// conjugated channel row restricted to one polarization group and a is the
/// group's port steering vector (subarray pattern included).
AngularProfile power_angular_profile(std::span<const CMatrix> per_rb, const ArrayGeometry& bs,
                                     const AngleGrid& grid = {}, bool parallel = true);

struct ClusterPeak {
  double azimuth = 0.0;
  double zenith = 0.0;
  double power_db = 0.0;
  int az_index = 0;
  int zen_index = 0;
  std::vector<std::pair<int, int>> region;  // (zenith index, azimuth index)
};

/// Clusters sorted by peak power, strongest first. `label` maps each grid
/// cell (zen * n_az + az) to its cluster or -1.
struct ClusterEstimate {
  std::vector<ClusterPeak> clusters;
  std::vector<int> label;
};

struct DetectOptions {
  double threshold_db = -12.0;
  double min_separation = 5.0;  // degrees
  double region_db = -6.0;      // support region relative to each peak
};

ClusterEstimate detect_clusters(const AngularProfile& profile, const DetectOptions& opts = {});

struct LayerBeam {
  int layer = 0;
  int beam_id = -1;
  int group = -1;
  double azimuth = 0.0;
  double zenith = 90.0;
  bool visible = true;
  int cluster = -1;  // index into ClusterEstimate::clusters, -1 for none
};

struct LayerBeamMap {
  std::vector<LayerBeam> layers;
};

/// Region membership first, then the nearest peak within `max_distance`
/// degrees, else none.
LayerBeamMap associate_layers(const Precoder& precoder, const Codebook& codebook,
                              const ClusterEstimate& clusters, const AngularProfile& profile,
                              double max_distance = 10.0);

/// Header row "zenith\azimuth,az...", then one row per zenith.
std::string heatmap_csv(const AngularProfile& profile);
void export_heatmap(const AngularProfile& profile, const std::string& path);
AngularProfile import_heatmap(const std::string& path);

std::string beams_csv(const LayerBeamMap& map);
std::string clusters_csv(const ClusterEstimate& clusters);
std::string association_csv(const LayerBeamMap& map);

struct AnalyzeOptions {
  AngleGrid grid;
  int o1 = 4, o2 = 4;  // codebook oversampling
  int n_layers = 8;
  DetectOptions detect;
  double max_distance = 10.0;
  bool parallel = true;
};

struct AnalysisResult {
  AngularProfile profile;
  ClusterEstimate clusters;
  Precoder precoder;
  LayerBeamMap layers;
};

/// Full pipeline on a link dump. Uses the dump's precoder when it carries
/// beam ids, otherwise assigns DFT beams from the channel.
AnalysisResult analyze_link(const LinkDump& dump, const AnalyzeOptions& opts = {});

/// Writes heatmap.csv, beams.csv, clusters.csv and association.csv.
std::vector<std::string> write_analysis(const std::string& dir, const AnalysisResult& result);

struct SyntheticCluster {
  double aod = 0.0;
  double zod = 90.0;
  double power_db = 0.0;
  double delay = 0.0;
  double spread = 0.0;  // rms azimuth spread of the rays, degrees
  int n_rays = 1;
  double delay_spread = 0.0;  // rays' delays span [delay, delay + delay_spread]
};

/// Cluster set with the given clusters (powers normalized to 1) and unit
/// large-scale gain. Rays sit evenly over +-2 spread in azimuth with Gaussian
/// power weights; each ray is its own single-ray entry so that it can carry
/// its own delay.
ClusterSet synthetic_cluster_set(const std::vector<SyntheticCluster>& clusters, std::uint64_t seed,
                                 double xpr_db = 8.0);

/// Built-in scenes: "two" (strong rich cluster at -20 deg plus a compact one
/// 6 dB down at +20 deg) and "one" (a single cluster with 10 deg rms spread).
std::vector<SyntheticCluster> synthetic_scene(const std::string& name);

/// Dump of one synthetic link towards `bs_preset` with a ue8 terminal. The
/// dump's cluster rows list the nominal clusters, not the rays.
LinkDump synthetic_link_dump(const std::vector<SyntheticCluster>& clusters, std::uint64_t seed,
                             const std::string& bs_preset = "x256", int n_rb = 50);

}  // namespace xmimo
