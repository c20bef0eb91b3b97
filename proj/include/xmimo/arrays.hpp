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

#include <string>
#include <string_view>
#include <vector>

#include "xmimo/common.hpp"

namespace xmimo {

/// Panel description. Ports sit on a port_cols x port_rows grid per
/// polarization; each port drives a vertical subarray of subarray_len
/// elements.
struct ArrayConfig {
  std::string name;
  int port_cols = 1;
  int port_rows = 1;
  bool dual_polarized = false;
  int subarray_len = 1;
  double elem_spacing_h = 0.5;  // wavelengths
  double elem_spacing_v = 0.5;  // wavelengths
  double carrier_freq = 7.125e9;
  double elem_gain_max = 8.0;  // dBi
  double elem_hpbw_az = 65.0;
  double elem_hpbw_zen = 65.0;
  double downtilt = 6.0;  // degrees, electrical, via subarray weights
  bool isotropic = false;  // element pattern ignored, gain = elem_gain_max

  int n_groups() const { return dual_polarized ? 2 : 1; }
  int ports_per_group() const { return port_cols * port_rows; }
  int n_ports() const { return ports_per_group() * n_groups(); }
  int n_elements() const { return n_ports() * subarray_len; }
  double wavelength() const { return kSpeedOfLight / carrier_freq; }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Named presets: "5g64", "x128", "x256", "ue4", "ue8".
ArrayConfig array_preset(std::string_view name);
std::vector<std::string> array_preset_names();

struct PortMap {
  std::vector<int> elements;
  std::vector<cdouble> weights;  // unit L2 norm
};

/// Physical layout of a panel. Port p = group * ports_per_group + row *
/// port_cols + col; element e of port p is p * subarray_len + k, k counted
/// upward inside the subarray. Positions are metres, panel centred at origin,
/// columns along y, rows along z, boresight along +x.
struct ArrayGeometry {
  ArrayConfig config;
  Eigen::Matrix3Xd element_positions;
  std::vector<PortMap> port_map;
  std::vector<double> polarization;  // per element, slant in degrees
  Eigen::Matrix3Xd port_positions;   // subarray phase centres

  int n_ports() const { return static_cast<int>(port_map.size()); }
  int n_elements() const { return static_cast<int>(element_positions.cols()); }
  int ports_per_group() const { return config.ports_per_group(); }
  int n_groups() const { return config.n_groups(); }
  int group_of_port(int p) const { return p / ports_per_group(); }
  double port_slant(int p) const { return polarization[port_map[p].elements.front()]; }
};

ArrayGeometry build_array(const ArrayConfig& config);

/// Unit wave vector for (azimuth, zenith) in degrees.
Eigen::Vector3d direction(double azimuth, double zenith);

/// Port-domain array response including the subarray virtualization.
CVector port_steering_vector(const ArrayGeometry& geom, double azimuth, double zenith);

/// Response of one port's subarray relative to its phase centre. Identical
/// for every port of a geometry.
cdouble subarray_factor(const ArrayGeometry& geom, double azimuth, double zenith);

/// Parabolic-in-dB element pattern, floored 30 dB below the peak.
double element_pattern_gain(double azimuth, double zenith, const ArrayConfig& config);

struct BeamAngle {
  double azimuth = 0.0;
  double zenith = 90.0;
  bool visible = true;  // false when the spatial frequency falls outside the visible region
};

/// Oversampled 2D DFT codebook addressing one polarization group. Beam index
/// b = k2 * (n1 * o1) + k1; entries ordered like the ports (row-major, column
/// fastest).
struct Codebook {
  CMatrix beams;  // (n1 * n2) x n_beams, unit-norm columns
  int n1 = 1, n2 = 1, o1 = 1, o2 = 1;
  std::vector<BeamAngle> beam_angles;

  int n_beams() const { return static_cast<int>(beams.cols()); }
  int n_subgroups() const { return o1 * o2; }
  int subgroup_of(int beam) const;
  /// Beam indices of one orthogonal subgroup, in ascending order.
  std::vector<int> subgroup(int id) const;
};

/// spacing_h / spacing_v are the port pitches in wavelengths.
Codebook dft_codebook(int n1, int n2, int o1, int o2, double spacing_h, double spacing_v);

/// Codebook matching a panel's port grid.
Codebook dft_codebook(const ArrayGeometry& geom, int o1, int o2);

}  // namespace xmimo
