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

#include <span>
#include <vector>

#include "xmimo/common.hpp"

/// Data-parallel inner loops. Every kernel has a serial reference and an
/// OpenMP variant that must agree bit for bit; the serial versions back the
/// unit tests and the benchmark compares the two.
namespace xmimo::kernels {

/// H_rb = sum_n phasors(n, rb) * G_n for every RB group.
std::vector<CMatrix> synthesize_rbs_serial(std::span<const CMatrix> cluster_matrices,
                                           const CMatrix& phasors);
std::vector<CMatrix> synthesize_rbs_omp(std::span<const CMatrix> cluster_matrices,
                                        const CMatrix& phasors);

/// Bartlett power per steering column: out[k] = sum_j |a_k^H x_j|^2 where the
/// snapshots x_j are the columns of `snapshots`.
RVector bartlett_serial(const CMatrix& steering, const CMatrix& snapshots);
RVector bartlett_omp(const CMatrix& steering, const CMatrix& snapshots);

}  // namespace xmimo::kernels
