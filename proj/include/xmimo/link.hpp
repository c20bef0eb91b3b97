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

namespace xmimo {

/// Highest 256QAM entry of the 5G NR MCS table: 948/1024 * 8 bps/Hz.
inline constexpr double kSeCap256Qam = 948.0 / 1024.0 * 8.0;
inline constexpr double kDefaultImplementationLossDb = 2.0;
inline constexpr double kDefaultOverhead = 0.14;

struct Interferer {
  const CMatrix* channel;  // n_rx x n_tx
  const CMatrix* precoder;  // n_tx x L, scaled
};

/// Per-layer post-MMSE SINR for received layers A = H W_own given the
/// interference-plus-noise covariance R (Hermitian positive definite).
RVector mmse_sinr(const Eigen::Ref<const CMatrix>& own_layers,
                  const Eigen::Ref<const CMatrix>& interference_plus_noise);

/// SINR_l = 1 / [(I + A^H R^-1 A)^-1]_ll - 1, A = H W_own,
/// R = noise I + sum_i H_i W_i W_i^H H_i^H. Throws if noise_power <= 0.
RVector mmse_sinr(const CMatrix& channel, const CMatrix& own_precoder,
                  std::span<const Interferer> interferers, double noise_power);

/// min(log2(1 + sinr / 10^(attenuation_db / 10)), se_cap).
double se_from_sinr(double sinr, double se_cap = kSeCap256Qam,
                    double attenuation_db = kDefaultImplementationLossDb);

struct LinkState {
  RMatrix sinr;  // n_rb x n_layers, linear
  RMatrix se;    // n_rb x n_layers, bps/Hz
  int rank = 0;
  double achieved_bits = 0.0;
};

/// Fills `se` from `sinr`.
void map_spectral_efficiency(LinkState& link, double se_cap = kSeCap256Qam,
                             double attenuation_db = kDefaultImplementationLossDb);

/// (1 - overhead) * sum_rb sum_layer SE * rb_group_bw.
double tti_throughput(const LinkState& link, double rb_group_bw, double overhead_fraction);

}  // namespace xmimo
