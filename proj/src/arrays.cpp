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

#include "xmimo/arrays.hpp"

#include <algorithm>
#include <cmath>

namespace xmimo {

void ArrayConfig::validate() const {
  if (port_cols < 1) throw ConfigError("port_cols must be >= 1");
  if (port_rows < 1) throw ConfigError("port_rows must be >= 1");
  if (subarray_len < 1) throw ConfigError("subarray_len must be >= 1");
  if (!(elem_spacing_h > 0.0)) throw ConfigError("elem_spacing_h must be > 0");
  if (!(elem_spacing_v > 0.0)) throw ConfigError("elem_spacing_v must be > 0");
  if (!(carrier_freq > 0.0)) throw ConfigError("carrier_freq must be > 0");
  if (!isotropic && (!(elem_hpbw_az > 0.0) || !(elem_hpbw_zen > 0.0)))
    throw ConfigError("elem_hpbw_az/elem_hpbw_zen must be > 0");
}

ArrayConfig array_preset(std::string_view name) {
  ArrayConfig c;
  c.name = std::string(name);
  if (name == "5g64") {
    c.port_cols = 8;
    c.port_rows = 4;
    c.dual_polarized = true;
    c.subarray_len = 3;
    c.carrier_freq = 3.5e9;
  } else if (name == "x256") {
    c.port_cols = 16;
    c.port_rows = 8;
    c.dual_polarized = true;
    c.subarray_len = 3;
  } else if (name == "x128") {
    c.port_cols = 8;
    c.port_rows = 8;
    c.dual_polarized = true;
    c.subarray_len = 6;
  } else if (name == "ue4" || name == "ue8") {
    c.port_cols = name == "ue4" ? 2 : 4;
    c.port_rows = 1;
    c.dual_polarized = true;
    c.subarray_len = 1;
    c.elem_gain_max = 0.0;
    c.downtilt = 0.0;
    c.isotropic = true;
  } else {
    throw ConfigError("unknown array preset '" + std::string(name) + "'");
  }
  return c;
}

std::vector<std::string> array_preset_names() { return {"5g64", "x128", "x256", "ue4", "ue8"}; }

Eigen::Vector3d direction(double azimuth, double zenith) {
  const double az = deg2rad(azimuth), ze = deg2rad(zenith);
  return {std::sin(ze) * std::cos(az), std::sin(ze) * std::sin(az), std::cos(ze)};
}

ArrayGeometry build_array(const ArrayConfig& config) {
  config.validate();
  ArrayGeometry g;
  g.config = config;
  const double lambda = config.wavelength();
  const double dh = config.elem_spacing_h * lambda;
  const double dv = config.elem_spacing_v * lambda;
  const int L = config.subarray_len;
  const int n_ports = config.n_ports();
  const int elem_rows = config.port_rows * L;

  g.element_positions.resize(3, config.n_elements());
  g.port_positions.resize(3, n_ports);
  g.port_map.resize(n_ports);
  g.polarization.resize(config.n_elements());

  const double y0 = 0.5 * (config.port_cols - 1) * dh;
  const double z0 = 0.5 * (elem_rows - 1) * dv;
  // Progressive phase steering the subarray to zenith 90 + downtilt, symmetric
  // about the subarray centre so the port response is real at broadside.
  const double tilt_cos = std::cos(deg2rad(90.0 + config.downtilt));
  const double norm = 1.0 / std::sqrt(static_cast<double>(L));

  for (int p = 0; p < n_ports; ++p) {
    const int group = p / config.ports_per_group();
    const int in_group = p % config.ports_per_group();
    const int row = in_group / config.port_cols;
    const int col = in_group % config.port_cols;
    const double slant = config.dual_polarized ? (group == 0 ? 45.0 : -45.0) : 0.0;
    const double y = col * dh - y0;
    const double zc = (row * L + 0.5 * (L - 1)) * dv - z0;
    g.port_positions.col(p) << 0.0, y, zc;
    PortMap& pm = g.port_map[p];
    for (int k = 0; k < L; ++k) {
      const int e = p * L + k;
      const double z = (row * L + k) * dv - z0;
      g.element_positions.col(e) << 0.0, y, z;
      g.polarization[e] = slant;
      const double phase = -2.0 * kPi * (z - zc) * tilt_cos / lambda;
      pm.elements.push_back(e);
      pm.weights.push_back(norm * std::polar(1.0, phase));
    }
  }
  return g;
}

cdouble subarray_factor(const ArrayGeometry& geom, double azimuth, double zenith) {
  const Eigen::Vector3d k = (2.0 * kPi / geom.config.wavelength()) * direction(azimuth, zenith);
  const PortMap& pm = geom.port_map.front();
  const Eigen::Vector3d ref = geom.port_positions.col(0);
  cdouble acc{0.0, 0.0};
  for (std::size_t i = 0; i < pm.elements.size(); ++i) {
    const double phase = k.dot(geom.element_positions.col(pm.elements[i]) - ref);
    acc += pm.weights[i] * std::polar(1.0, phase);
  }
  return acc;
}

CVector port_steering_vector(const ArrayGeometry& geom, double azimuth, double zenith) {
  if (!(zenith > 0.0 && zenith < 180.0))
    throw std::invalid_argument("port_steering_vector: zenith must be in (0, 180)");
  const Eigen::Vector3d k = (2.0 * kPi / geom.config.wavelength()) * direction(azimuth, zenith);
  const cdouble af = subarray_factor(geom, azimuth, zenith);
  CVector a(geom.n_ports());
  for (int p = 0; p < geom.n_ports(); ++p)
    a[p] = af * std::polar(1.0, k.dot(geom.port_positions.col(p)));
  return a;
}

double element_pattern_gain(double azimuth, double zenith, const ArrayConfig& config) {
  if (config.isotropic) return config.elem_gain_max;
  constexpr double kFloor = 30.0;
  double az = std::remainder(azimuth, 360.0);
  const double a_h = -std::min(12.0 * std::pow(az / config.elem_hpbw_az, 2), kFloor);
  const double a_v = -std::min(12.0 * std::pow((zenith - 90.0) / config.elem_hpbw_zen, 2), kFloor);
  return config.elem_gain_max - std::min(-(a_h + a_v), kFloor);
}

int Codebook::subgroup_of(int beam) const {
  const int k1 = beam % (n1 * o1);
  const int k2 = beam / (n1 * o1);
  return (k2 % o2) * o1 + (k1 % o1);
}

std::vector<int> Codebook::subgroup(int id) const {
  std::vector<int> out;
  for (int b = 0; b < n_beams(); ++b)
    if (subgroup_of(b) == id) out.push_back(b);
  return out;
}

namespace {

double wrap_half(double x) { return x - std::floor(x + 0.5); }

}  // namespace

Codebook dft_codebook(int n1, int n2, int o1, int o2, double spacing_h, double spacing_v) {
  if (n1 < 1 || n2 < 1 || o1 < 1 || o2 < 1)
    throw std::invalid_argument("dft_codebook: counts must be >= 1");
  Codebook cb;
  cb.n1 = n1;
  cb.n2 = n2;
  cb.o1 = o1;
  cb.o2 = o2;
  const int nb1 = n1 * o1, nb2 = n2 * o2;
  cb.beams.resize(n1 * n2, nb1 * nb2);
  cb.beam_angles.resize(nb1 * nb2);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n1 * n2));
  for (int k2 = 0; k2 < nb2; ++k2) {
    for (int k1 = 0; k1 < nb1; ++k1) {
      const int b = k2 * nb1 + k1;
      for (int r = 0; r < n2; ++r)
        for (int c = 0; c < n1; ++c) {
          const double phase = 2.0 * kPi * (static_cast<double>(c) * k1 / nb1 + static_cast<double>(r) * k2 / nb2);
          cb.beams(r * n1 + c, b) = norm * std::polar(1.0, phase);
        }
      // Spatial frequencies: spacing_h * sin(zen) * sin(az) and spacing_v * cos(zen).
      const double u = wrap_half(static_cast<double>(k1) / nb1) / spacing_h;
      const double v = wrap_half(static_cast<double>(k2) / nb2) / spacing_v;
      BeamAngle& ang = cb.beam_angles[b];
      ang.visible = u * u + v * v <= 1.0 + 1e-12;
      const double cz = std::clamp(v, -1.0, 1.0);
      ang.zenith = rad2deg(std::acos(cz));
      const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
      const double sa = sz > 0.0 ? std::clamp(u / sz, -1.0, 1.0) : 0.0;
      ang.azimuth = rad2deg(std::asin(sa));
    }
  }
  return cb;
}

Codebook dft_codebook(const ArrayGeometry& geom, int o1, int o2) {
  const ArrayConfig& c = geom.config;
  return dft_codebook(c.port_cols, c.port_rows, o1, o2, c.elem_spacing_h,
                      c.elem_spacing_v * c.subarray_len);
}

}  // namespace xmimo
