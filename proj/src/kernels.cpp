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

#include "xmimo/kernels.hpp"

namespace xmimo::kernels {

namespace {

CMatrix synthesize_one(std::span<const CMatrix> g, const CMatrix& phasors, Eigen::Index rb) {
  CMatrix h = CMatrix::Zero(g.front().rows(), g.front().cols());
  for (std::size_t n = 0; n < g.size(); ++n) h.noalias() += phasors(static_cast<Eigen::Index>(n), rb) * g[n];
  return h;
}

double bartlett_one(const CMatrix& steering, const CMatrix& snapshots, Eigen::Index k) {
  return (steering.col(k).adjoint() * snapshots).cwiseAbs2().sum();
}

}  // namespace

std::vector<CMatrix> synthesize_rbs_serial(std::span<const CMatrix> cluster_matrices,
                                           const CMatrix& phasors) {
  std::vector<CMatrix> out(static_cast<std::size_t>(phasors.cols()));
  for (Eigen::Index rb = 0; rb < phasors.cols(); ++rb)
    out[static_cast<std::size_t>(rb)] = synthesize_one(cluster_matrices, phasors, rb);
  return out;
}

std::vector<CMatrix> synthesize_rbs_omp(std::span<const CMatrix> cluster_matrices,
                                        const CMatrix& phasors) {
  const Eigen::Index n_rbs = phasors.cols();
  std::vector<CMatrix> out(static_cast<std::size_t>(n_rbs));
#pragma omp parallel for schedule(static)
  for (Eigen::Index rb = 0; rb < n_rbs; ++rb)
    out[static_cast<std::size_t>(rb)] = synthesize_one(cluster_matrices, phasors, rb);
  return out;
}

RVector bartlett_serial(const CMatrix& steering, const CMatrix& snapshots) {
  RVector out(steering.cols());
  for (Eigen::Index k = 0; k < steering.cols(); ++k) out[k] = bartlett_one(steering, snapshots, k);
  return out;
}

RVector bartlett_omp(const CMatrix& steering, const CMatrix& snapshots) {
  const Eigen::Index n = steering.cols();
  RVector out(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < n; ++k) out[k] = bartlett_one(steering, snapshots, k);
  return out;
}

}  // namespace xmimo::kernels
