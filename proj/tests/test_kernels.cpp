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

#include <omp.h>

#include "support.hpp"
#include "xmimo/kernels.hpp"

using namespace xmimo;
using xmimo::test::random_cmatrix;

TEST_CASE("RB synthesis: OpenMP matches the serial reference bit for bit") {
  Rng rng(61);
  std::vector<CMatrix> g;
  for (int n = 0; n < 9; ++n) g.push_back(random_cmatrix(rng, 8, 128));
  const CMatrix ph = random_cmatrix(rng, 9, 50);
  const auto a = kernels::synthesize_rbs_serial(g, ph);
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    const auto b = kernels::synthesize_rbs_omp(g, ph);
    REQUIRE(a.size() == b.size());
    for (std::size_t rb = 0; rb < a.size(); ++rb) CHECK((a[rb] - b[rb]).cwiseAbs().maxCoeff() == 0.0);
  }
  // Reference value for one RB.
  CMatrix ref = CMatrix::Zero(8, 128);
  for (int n = 0; n < 9; ++n) ref += ph(n, 7) * g[static_cast<std::size_t>(n)];
  CHECK((a[7] - ref).norm() < 1e-12 * ref.norm());
}

TEST_CASE("Bartlett: OpenMP matches the serial reference bit for bit") {
  Rng rng(62);
  const CMatrix steer = random_cmatrix(rng, 64, 500);
  const CMatrix snaps = random_cmatrix(rng, 64, 40);
  const RVector a = kernels::bartlett_serial(steer, snaps);
  for (int threads : {1, 3}) {
    omp_set_num_threads(threads);
    CHECK((a - kernels::bartlett_omp(steer, snaps)).cwiseAbs().maxCoeff() == 0.0);
  }
  for (int k : {0, 123, 499}) {
    double ref = 0.0;
    for (int j = 0; j < 40; ++j) ref += std::norm(steer.col(k).dot(snaps.col(j)));
    CHECK(a[k] == doctest::Approx(ref).epsilon(1e-12));
  }
}
