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
#include <set>

#include "xmimo/arrays.hpp"

using namespace xmimo;

namespace {

ArrayConfig flat(ArrayConfig c) {
  c.downtilt = 0.0;
  return c;
}

// Element-level array response computed from the panel layout rules alone,
// without the port map or the subarray factor.
CVector brute_force_response(const ArrayConfig& c, double az, double zen) {
  const double lambda = c.wavelength();
  const double dh = c.elem_spacing_h * lambda, dv = c.elem_spacing_v * lambda;
  const int L = c.subarray_len;
  const double kx = std::sin(deg2rad(zen)) * std::cos(deg2rad(az));
  const double ky = std::sin(deg2rad(zen)) * std::sin(deg2rad(az));
  const double kz = std::cos(deg2rad(zen));
  const double tilt = std::cos(deg2rad(90.0 + c.downtilt));
  CVector out(c.n_ports());
  for (int g = 0; g < c.n_groups(); ++g)
    for (int row = 0; row < c.port_rows; ++row)
      for (int col = 0; col < c.port_cols; ++col) {
        cdouble acc = 0.0;
        const double y = (col - 0.5 * (c.port_cols - 1)) * dh;
        const double zc = (row * L + 0.5 * (L - 1) - 0.5 * (c.port_rows * L - 1)) * dv;
        for (int k = 0; k < L; ++k) {
          const double z = (row * L + k - 0.5 * (c.port_rows * L - 1)) * dv;
          const cdouble w = std::polar(1.0 / std::sqrt(double(L)), -2.0 * kPi * (z - zc) * tilt / lambda);
          acc += w * std::polar(1.0, 2.0 * kPi / lambda * (kx * 0.0 + ky * y + kz * z));
        }
        out[g * c.ports_per_group() + row * c.port_cols + col] = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("preset panels have the expected port and element counts") {
  const auto g256 = build_array(array_preset("x256"));
  CHECK(g256.n_ports() == 256);
  CHECK(g256.n_elements() == 768);
  const auto g64 = build_array(array_preset("5g64"));
  CHECK(g64.n_ports() == 64);
  CHECK(g64.n_elements() == 192);
  const auto g128 = build_array(array_preset("x128"));
  CHECK(g128.n_ports() == 128);
  CHECK(g128.n_elements() == 768);
  CHECK(build_array(array_preset("ue8")).n_ports() == 8);
  CHECK(build_array(array_preset("ue4")).n_ports() == 4);
  CHECK_THROWS_AS(array_preset("x512"), ConfigError);
}

TEST_CASE("port map covers every element once with unit-norm weights") {
  for (const auto& name : array_preset_names()) {
    const auto g = build_array(array_preset(name));
    std::vector<int> owner(static_cast<std::size_t>(g.n_elements()), 0);
    for (const auto& pm : g.port_map) {
      double n2 = 0.0;
      for (auto w : pm.weights) n2 += std::norm(w);
      CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
      for (int e : pm.elements) ++owner[static_cast<std::size_t>(e)];
    }
    CHECK(std::all_of(owner.begin(), owner.end(), [](int n) { return n == 1; }));
  }
}

TEST_CASE("invalid array configs are rejected with the field name") {
  ArrayConfig c = array_preset("x256");
  c.subarray_len = 0;
  CHECK_THROWS_WITH_AS(build_array(c), doctest::Contains("subarray_len"), ConfigError);
  c = array_preset("x256");
  c.elem_spacing_h = 0.0;
  CHECK_THROWS_WITH_AS(build_array(c), doctest::Contains("elem_spacing_h"), ConfigError);
  c = array_preset("x256");
  c.elem_spacing_v = -0.5;
  CHECK_THROWS_WITH_AS(build_array(c), doctest::Contains("elem_spacing_v"), ConfigError);
}

TEST_CASE("boresight response is co-phased within a polarization group") {
  const auto g = build_array(flat(array_preset("x256")));
  const CVector a = port_steering_vector(g, 0.0, 90.0);
  for (int p = 1; p < g.n_ports(); ++p) CHECK(std::abs(a[p] - a[0]) < 1e-12);
}

TEST_CASE("negated azimuth conjugates the response at zenith 90") {
  const auto g = build_array(flat(array_preset("x256")));
  for (double az : {7.0, 23.5, 61.0}) {
    const CVector ap = port_steering_vector(g, az, 90.0);
    const CVector an = port_steering_vector(g, -az, 90.0);
    CHECK((an - ap.conjugate()).norm() < 1e-10);
  }
}

TEST_CASE("port response matches an element-level brute-force sum") {
  for (const char* name : {"x256", "x128", "5g64"}) {
    const auto c = array_preset(name);
    const auto g = build_array(c);
    for (auto [az, zen] : {std::pair{10.0, 95.0}, {-35.0, 100.0}, {50.0, 84.0}}) {
      const CVector a = port_steering_vector(g, az, zen);
      const CVector ref = brute_force_response(c, az, zen);
      CHECK((a - ref).norm() < 1e-10 * ref.norm());
    }
  }
  CHECK_THROWS(port_steering_vector(build_array(array_preset("x256")), 0.0, 0.0));
}

TEST_CASE("element pattern") {
  const auto c = array_preset("x256");
  CHECK(element_pattern_gain(0.0, 90.0, c) == doctest::Approx(8.0));
  CHECK(element_pattern_gain(32.5, 90.0, c) == doctest::Approx(5.0));
  CHECK(element_pattern_gain(-32.5, 90.0, c) == doctest::Approx(5.0));
  CHECK(element_pattern_gain(0.0, 122.5, c) == doctest::Approx(5.0));
  CHECK(element_pattern_gain(180.0, 90.0, c) == doctest::Approx(-22.0));
  CHECK(element_pattern_gain(90.0, 20.0, c) == doctest::Approx(-22.0));
  auto iso = c;
  iso.isotropic = true;
  CHECK(element_pattern_gain(150.0, 30.0, iso) == doctest::Approx(8.0));
}

TEST_CASE("DFT codebook beams are unit norm and orthogonal inside a subgroup") {
  const auto g = build_array(array_preset("x256"));
  const Codebook cb = dft_codebook(g, 4, 4);
  CHECK(cb.n_beams() == 16 * 8 * 16);
  for (int b = 0; b < cb.n_beams(); ++b) CHECK(cb.beams.col(b).norm() == doctest::Approx(1.0).epsilon(1e-12));
  std::set<int> seen;
  for (int s = 0; s < cb.n_subgroups(); ++s) {
    const auto ids = cb.subgroup(s);
    CHECK(ids.size() == 128);
    CMatrix b(cb.beams.rows(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      b.col(static_cast<Eigen::Index>(i)) = cb.beams.col(ids[i]);
      CHECK(cb.subgroup_of(ids[i]) == s);
      seen.insert(ids[i]);
    }
    const CMatrix gram = b.adjoint() * b;
    CHECK((gram - CMatrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(static_cast<int>(seen.size()) == cb.n_beams());
  CHECK_THROWS(dft_codebook(0, 4, 1, 1, 0.5, 0.5));
}

TEST_CASE("visible beam angles point each beam at its steering vector") {
  const auto g = build_array(array_preset("x256"));
  const Codebook cb = dft_codebook(g, 4, 4);
  const int ppg = g.ports_per_group();
  int visible = 0;
  for (int b = 0; b < cb.n_beams(); ++b) {
    const BeamAngle& ang = cb.beam_angles[b];
    if (!ang.visible || ang.zenith <= 0.5 || ang.zenith >= 179.5) continue;
    ++visible;
    const CVector a = port_steering_vector(g, ang.azimuth, ang.zenith).head(ppg);
    const double match = std::norm(cb.beams.col(b).dot(a)) / a.squaredNorm();
    CHECK(match == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(visible > 0);
}
