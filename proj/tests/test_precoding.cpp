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
#include <vector>

#include "support.hpp"
#include "xmimo/arrays.hpp"
#include "xmimo/channel.hpp"
#include "xmimo/precoding.hpp"

using namespace xmimo;
using xmimo::test::random_cmatrix;
using xmimo::test::rel_diff;
using xmimo::test::pinv;

namespace {

double capacity_sum(const RVector& ev, double noise, int r) {
  double c = 0.0;
  for (int i = 0; i < r; ++i) c += std::log2(1.0 + ev[i] / r / noise);
  return c;
}

CMatrix on_group(const CVector& beam, int group, int n_groups) {
  CMatrix x = CMatrix::Zero(beam.size() * n_groups, 1);
  x.block(group * beam.size(), 0, beam.size(), 1) = beam;
  return x;
}

}  // namespace

TEST_CASE("identity channel capacity") {
  const std::vector<CMatrix> h{CMatrix::Identity(2, 2)};
  for (double noise : {0.1, 1.0, 4.0}) {
    const Precoder p = svd_precoder(h, 2);
    CHECK(p.n_layers() == 2);
    const CMatrix r = average_covariance(h);
    CHECK(covariance_capacity(r, p.scaled(), noise) ==
          doctest::Approx(2.0 * std::log2(1.0 + 1.0 / (2.0 * noise))).epsilon(1e-12));
  }
}

TEST_CASE("rank-deficient channel is truncated to its numerical rank") {
  Rng rng(11);
  const CMatrix u = random_cmatrix(rng, 4, 1), v = random_cmatrix(rng, 1, 32);
  const std::vector<CMatrix> h{u * v};
  const Precoder p = svd_precoder(h, 2);
  CHECK(p.n_layers() == 1);
  CHECK(p.total_power() == doctest::Approx(1.0).epsilon(1e-12));
  const WidebandEigen eig = wideband_eigen(h, 2);
  CHECK(std::sqrt(eig.values[1]) < 1e-9 * std::sqrt(eig.values[0]));
}

TEST_CASE("precoder power normalization") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<CMatrix> h;
    for (int rb = 0; rb < 6; ++rb) h.push_back(random_cmatrix(rng, 8, 64));
    for (bool wf : {false, true}) {
      SvdPrecoderOptions o;
      o.water_filling = wf;
      o.noise_power = 10.0;
      const Precoder p = svd_precoder(h, 8, o);
      CHECK(std::abs(p.total_power() - 1.0) < 1e-12);
      const CMatrix gram = p.matrix.adjoint() * p.matrix;
      CHECK((gram - CMatrix::Identity(gram.rows(), gram.cols())).norm() < 1e-10);
    }
  }
}

TEST_CASE("water-filling never loses to equal power") {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<CMatrix> h{random_cmatrix(rng, 4, 16)};
    const CMatrix r = average_covariance(h);
    SvdPrecoderOptions wf;
    wf.water_filling = true;
    wf.noise_power = 3.0;
    const double c_eq = covariance_capacity(r, svd_precoder(h, 4).scaled(), 3.0);
    const double c_wf = covariance_capacity(r, svd_precoder(h, 4, wf).scaled(), 3.0);
    CHECK(c_wf >= c_eq - 1e-12);
  }
}

TEST_CASE("covariance root reproduces the wideband eigen-decomposition") {
  Rng rng(14);
  std::vector<CMatrix> g;
  std::vector<double> delays;
  for (int n = 0; n < 5; ++n) {
    g.push_back(random_cmatrix(rng, 4, 32));
    delays.push_back(100e-9 * n);
  }
  const CMatrix ph = delay_phasors(delays, 12, 2e6);
  std::vector<CMatrix> per_rb;
  for (int rb = 0; rb < 12; ++rb) {
    CMatrix h = CMatrix::Zero(4, 32);
    for (int n = 0; n < 5; ++n) h += ph(n, rb) * g[static_cast<std::size_t>(n)];
    per_rb.push_back(h);
  }
  const WidebandEigen a = wideband_eigen(per_rb, 4);
  const WidebandEigen b = wideband_eigen_from_root(covariance_root(g, ph), 12, 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(rel_diff(a.values[i], b.values[i]) < 1e-10);
    CHECK(std::abs(a.vectors.col(i).dot(b.vectors.col(i))) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("eigen-precoder beats every DFT precoder of equal rank") {
  const Codebook cb = dft_codebook(4, 2, 2, 2, 0.5, 1.5);
  const int ppg = 8, n_groups = 2;
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<CMatrix> h{random_cmatrix(rng, 4, ppg * n_groups)};
    const CMatrix r = average_covariance(h);
    const double noise = 0.5;
    // Rank 1: every beam on every polarization group.
    const double c_svd1 = covariance_capacity(r, svd_precoder(h, 1).scaled(), noise);
    double best1 = 0.0;
    for (int b = 0; b < cb.n_beams(); ++b)
      for (int g = 0; g < n_groups; ++g)
        best1 = std::max(best1, covariance_capacity(r, on_group(cb.beams.col(b), g, n_groups), noise));
    CHECK(c_svd1 >= best1 - 1e-9);
    // Rank 2: every orthogonal pair of (beam, group) columns.
    const double c_svd2 = covariance_capacity(r, svd_precoder(h, 2).scaled(), noise);
    double best2 = 0.0;
    for (int s = 0; s < cb.n_subgroups(); ++s) {
      const auto ids = cb.subgroup(s);
      std::vector<CMatrix> cols;
      for (int b : ids)
        for (int g = 0; g < n_groups; ++g) cols.push_back(on_group(cb.beams.col(b), g, n_groups));
      for (std::size_t i = 0; i < cols.size(); ++i)
        for (std::size_t j = i + 1; j < cols.size(); ++j) {
          CMatrix w(ppg * n_groups, 2);
          w << cols[i], cols[j];
          best2 = std::max(best2, covariance_capacity(r, w / std::sqrt(2.0), noise));
        }
    }
    CHECK(c_svd2 >= best2 - 1e-9);
    const Precoder d = dft_beam_assignment(h, cb, n_groups, 2);
    CHECK(c_svd2 >= covariance_capacity(r, d.scaled(), noise) - 1e-9);
  }
}

TEST_CASE("select_rank maximizes the equal-power capacity sum") {
  Rng rng(16);
  const std::vector<CMatrix> h{random_cmatrix(rng, 8, 256)};
  CHECK(select_rank(h, 1e-6, 8) == 8);
  CHECK(select_rank(h, 1e9, 8) == 1);
  for (int trial = 0; trial < 200; ++trial) {
    RVector ev(8);
    for (int i = 0; i < 8; ++i) ev[i] = std::exp(3.0 * rng.normal());
    std::sort(ev.data(), ev.data() + 8, std::greater<>());
    const double noise = std::exp(2.0 * rng.normal());
    const int max_rank = 1 + trial % 8;
    int best = 1;
    for (int r = 2; r <= max_rank; ++r)
      if (capacity_sum(ev, noise, r) > capacity_sum(ev, noise, best)) best = r;
    CHECK(select_rank(ev, noise, max_rank) == best);
  }
  const std::vector<CMatrix> thin{random_cmatrix(rng, 2, 64)};
  CHECK(select_rank(thin, 1e-6, 2) <= 2);
}

TEST_CASE("ZF on orthogonal channels is the matched filter") {
  CMatrix e1 = CMatrix::Zero(1, 8), e2 = CMatrix::Zero(1, 8);
  e1(0, 0) = 2.0;
  e1(0, 3) = cdouble(0.0, 1.0);
  e2(0, 5) = 1.5;
  const std::vector<CMatrix> eff{e1, e2};
  const ZfResult z = zf_mu_precoder(eff, 1.0);
  REQUIRE(z.ok);
  for (std::size_t u = 0; u < 2; ++u) {
    const CVector mf = eff[u].row(0).adjoint().normalized();
    CHECK(std::abs(z.precoders[u].matrix.col(0).dot(mf)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ZF matches a pseudo-inverse oracle and nulls cross-UE leakage") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<CMatrix> eff;
    for (int u = 0; u < 4; ++u) eff.push_back(random_cmatrix(rng, 2, 256));
    const double noise = 0.3;
    const ZfResult z = zf_mu_precoder(eff, noise);
    REQUIRE(z.ok);
    CMatrix stacked(8, 256);
    for (int u = 0; u < 4; ++u) stacked.middleRows(2 * u, 2) = eff[static_cast<std::size_t>(u)];
    const CMatrix w = pinv(stacked);
    for (int u = 0; u < 4; ++u)
      for (int k = 0; k < 2; ++k) {
        const int l = 2 * u + k;
        const CVector wl = w.col(l).normalized();
        const double sinr = std::norm((stacked.row(l) * wl)(0, 0)) / 8.0 / noise;
        CHECK(rel_diff(z.layer_sinr[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)], sinr) < 1e-9);
      }
    for (int u = 0; u < 4; ++u) {
      const CMatrix own = eff[static_cast<std::size_t>(u)] * z.precoders[static_cast<std::size_t>(u)].scaled();
      for (int v = 0; v < 4; ++v) {
        if (v == u) continue;
        const CMatrix leak = eff[static_cast<std::size_t>(v)] * z.precoders[static_cast<std::size_t>(u)].scaled();
        CHECK(lin2db(leak.squaredNorm() / own.squaredNorm()) < -170.0);
      }
      CHECK(z.precoders[static_cast<std::size_t>(u)].total_power() == doctest::Approx(0.25));
    }
  }
}

TEST_CASE("ZF rejects ill-conditioned stacks") {
  Rng rng(18);
  const CMatrix e = random_cmatrix(rng, 1, 64);
  const std::vector<CMatrix> same{e, e};
  const ZfResult z = zf_mu_precoder(same, 1.0);
  CHECK_FALSE(z.ok);
  CHECK(z.precoders.empty());
  const std::vector<CMatrix> too_many{random_cmatrix(rng, 3, 4), random_cmatrix(rng, 2, 4)};
  CHECK_THROWS(zf_mu_precoder(too_many, 1.0));
}

TEST_CASE("DFT beam assignment") {
  const Codebook cb = dft_codebook(8, 4, 2, 2, 0.5, 1.5);
  const int ppg = 32;
  SUBCASE("a channel aligned with one beam gets that beam first") {
    for (int k : {0, 5, 37, 100}) {
      const std::vector<CMatrix> h{on_group(cb.beams.col(k), 0, 2).adjoint()};
      const Precoder p = dft_beam_assignment(h, cb, 2, 1);
      CHECK(p.beam_ids[0] == k);
      CHECK(p.beam_groups[0] == 0);
    }
  }
  SUBCASE("two orthogonal clusters both receive beams") {
    const auto ids = cb.subgroup(1);
    const int k1 = ids[3], k2 = ids[20];
    CMatrix h(4, 2 * ppg);
    h.row(0) = on_group(cb.beams.col(k1), 0, 2).adjoint();
    h.row(1) = on_group(cb.beams.col(k1), 1, 2).adjoint();
    h.row(2) = on_group(cb.beams.col(k2), 0, 2).adjoint();
    h.row(3) = on_group(cb.beams.col(k2), 1, 2).adjoint();
    const std::vector<CMatrix> per_rb{h};
    const Precoder p = dft_beam_assignment(per_rb, cb, 2, 8);
    CHECK(std::count(p.beam_ids.begin(), p.beam_ids.end(), k1) >= 1);
    CHECK(std::count(p.beam_ids.begin(), p.beam_ids.end(), k2) >= 1);
    const CMatrix gram = p.matrix.adjoint() * p.matrix;
    CHECK((gram - CMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(p.total_power() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("selected beams are mutually orthogonal on random channels") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
      const std::vector<CMatrix> h{random_cmatrix(rng, 8, 2 * ppg)};
      const Precoder p = dft_beam_assignment(h, cb, 2, 8);
      const CMatrix gram = p.matrix.adjoint() * p.matrix;
      CHECK((gram - CMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
      const int sg = cb.subgroup_of(p.beam_ids[0]);
      for (int b : p.beam_ids) CHECK(cb.subgroup_of(b) == sg);
    }
  }
}
