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

#include "xmimo/arrays.hpp"
#include "xmimo/common.hpp"

namespace xmimo {

/// Transmit precoder for one UE. Columns of `matrix` are unit-norm layer
/// directions; the radiated signal is matrix * diag(sqrt(layer_power)).
struct Precoder {
  CMatrix matrix;
  std::vector<double> layer_power;
  std::vector<int> beam_ids;     // codebook index per layer, when codebook-based
  std::vector<int> beam_groups;  // polarization group per layer, when codebook-based

  int n_layers() const { return static_cast<int>(matrix.cols()); }
  double total_power() const;
  /// matrix * diag(sqrt(layer_power)).
  CMatrix scaled() const;
};

/// Eigen-decomposition of the RB-averaged transmit covariance
/// (1/n_rb) sum_rb H_rb^H H_rb, strongest first.
struct WidebandEigen {
  RVector values;   // sigma_i^2, descending
  CMatrix vectors;  // n_tx x k, right singular vectors
};

/// `per_rb` are the RB matrices. Only the leading `max_vectors` are returned.
WidebandEigen wideband_eigen(std::span<const CMatrix> per_rb, int max_vectors);

/// Same decomposition from a covariance root M with M^H M = sum_rb H_rb^H H_rb.
WidebandEigen wideband_eigen_from_root(const CMatrix& root, int n_rbs, int max_vectors);

/// Sum of H_rb^H H_rb written as M^H M with M small: rows = n_clusters * n_rx.
/// `phasors` is the n_clusters x n_rbs delay-phasor table of the link.
CMatrix covariance_root(std::span<const CMatrix> cluster_matrices, const CMatrix& phasors);

struct SvdPrecoderOptions {
  bool water_filling = false;
  double noise_power = 1.0;  // only used by water-filling
};

/// Wideband eigen-precoder; truncated to the numerical rank
/// (sigma > 1e-9 * sigma_max).
Precoder svd_precoder(std::span<const CMatrix> per_rb, int n_layers,
                      const SvdPrecoderOptions& opts = {});
Precoder svd_precoder(const WidebandEigen& eig, int n_layers, const SvdPrecoderOptions& opts = {});

/// Rank maximizing sum_{i<=r} log2(1 + sigma_i^2 (1/r) / noise); ties go to
/// the smaller rank. Transmit power is normalized to 1.
int select_rank(const RVector& eigenvalues, double noise_power, int max_rank);
int select_rank(std::span<const CMatrix> per_rb, double noise_power, int max_rank);

/// Zero-forcing solution expressed on the Gram matrix of the stacked
/// effective channels (E E^H), so that W = E^H * coefficients.
struct ZfSolution {
  bool ok = false;
  double condition = 0.0;       // sigma_max / sigma_min of E
  CMatrix coefficients;         // L x L
  std::vector<double> sinr;     // per layer, equal power 1/L
  std::vector<double> gain;     // |effective gain|^2 per layer before power split
};

inline constexpr double kZfMaxCondition = 1e8;

ZfSolution zf_from_gram(const CMatrix& gram, double noise_power);

struct ZfResult {
  bool ok = false;  // false: stack ill-conditioned, pairing must be rejected
  double condition = 0.0;
  std::vector<Precoder> precoders;              // one per UE
  std::vector<std::vector<double>> layer_sinr;  // per UE, per layer
};

/// `effective` holds each UE's effective channel (rank x n_tx).
ZfResult zf_mu_precoder(std::span<const CMatrix> effective, double noise_power);

/// Greedy orthogonal DFT beam selection on the RB-averaged covariance. Beams
/// are picked inside one orthogonal subgroup, on either polarization group,
/// each maximizing the channel energy not already captured by earlier picks.
Precoder dft_beam_assignment(const CMatrix& covariance, const Codebook& codebook, int n_groups,
                             int n_layers);
Precoder dft_beam_assignment(std::span<const CMatrix> per_rb, const Codebook& codebook,
                             int n_groups, int n_layers);

/// log2 det(I + W^H R W / noise) for a scaled precoder W.
double covariance_capacity(const CMatrix& covariance, const CMatrix& scaled_precoder,
                           double noise_power);

/// Sum over RBs of H_rb^H H_rb divided by the RB count.
CMatrix average_covariance(std::span<const CMatrix> per_rb);

}  // namespace xmimo
