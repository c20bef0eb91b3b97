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

// Helpers and reference oracles shared by the unit tests and the acceptance
// runner.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "xmimo/common.hpp"
#include "xmimo/link.hpp"
#include "xmimo/rng.hpp"
#include "xmimo/scheduler.hpp"

namespace xmimo::test {

/// i.i.d. CN(0, 1) entries.
inline CMatrix random_cmatrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  CMatrix m(rows, cols);
  const double s = std::sqrt(0.5);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = {s * rng.normal(), s * rng.normal()};
  return m;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

// Moore-Penrose inverse from a full SVD, independent of the Gram route.
inline CMatrix pinv(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
}

// Explicit per-layer MMSE filter w = R_l^-1 a_l with R_l the covariance of
// everything except layer l; SINR = a_l^H R_l^-1 a_l.
inline std::vector<double> explicit_mmse(const CMatrix& h, const CMatrix& w,
                                         const std::vector<Interferer>& intf, double noise) {
  const CMatrix a = h * w;
  CMatrix r = noise * CMatrix::Identity(h.rows(), h.rows());
  for (const auto& i : intf) {
    const CMatrix b = *i.channel * *i.precoder;
    r += b * b.adjoint();
  }
  std::vector<double> out;
  for (Eigen::Index l = 0; l < a.cols(); ++l) {
    CMatrix rl = r;
    for (Eigen::Index k = 0; k < a.cols(); ++k)
      if (k != l) rl += a.col(k) * a.col(k).adjoint();
    const CVector f = rl.fullPivLu().solve(a.col(l));
    out.push_back(std::real(a.col(l).dot(f)));
  }
  return out;
}

inline CellCandidates make_cell(const std::vector<CMatrix>& eff, const SchedulerConfig& cfg,
                                double noise = 1.0) {
  CellCandidates cell;
  Eigen::Index rows = 0;
  for (const auto& e : eff) rows += e.rows();
  CMatrix stacked(rows, eff.front().cols());
  rows = 0;
  for (std::size_t i = 0; i < eff.size(); ++i) {
    Candidate c;
    c.ue = static_cast<int>(i);
    c.mu_rank = static_cast<int>(eff[i].rows());
    c.su_rank = 1;
    c.noise = noise;
    c.su_rate = cfg.rate(se_from_sinr(eff[i].row(0).squaredNorm() / noise, cfg.se_cap, cfg.implementation_loss_db));
    cell.candidates.push_back(c);
    cell.mu_offset.push_back(static_cast<int>(rows));
    stacked.middleRows(rows, eff[i].rows()) = eff[i];
    rows += eff[i].rows();
  }
  cell.mu_gram = stacked * stacked.adjoint();
  return cell;
}

// Best weighted-sum objective over every subset of at most max_paired UEs.
inline double brute_force_best(const CellCandidates& cell, const std::vector<double>& w,
                               const SchedulerConfig& cfg, std::vector<int>* best_set = nullptr) {
  const int n = static_cast<int>(cell.candidates.size());
  double best = -1.0;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> s;
    int layers = 0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        s.push_back(i);
        layers += cell.candidates[static_cast<std::size_t>(i)].mu_rank;
      }
    if (static_cast<int>(s.size()) > cfg.max_paired || (s.size() > 1 && layers > cfg.max_total_layers)) continue;
    const double obj = s.size() == 1 ? w[static_cast<std::size_t>(s[0])] * cell.candidates[static_cast<std::size_t>(s[0])].su_rate
                                     : mu_objective(cell, s, w, cfg);
    if (obj > best) {
      best = obj;
      if (best_set) *best_set = s;
    }
  }
  return best;
}

}  // namespace xmimo::test
