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

#include "xmimo/precoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xmimo {

double Precoder::total_power() const {
  return std::accumulate(layer_power.begin(), layer_power.end(), 0.0);
}

CMatrix Precoder::scaled() const {
  CMatrix w = matrix;
  for (int l = 0; l < n_layers(); ++l) w.col(l) *= std::sqrt(layer_power[static_cast<std::size_t>(l)]);
  return w;
}

namespace {

// Top-k eigenpairs of a Hermitian PSD matrix, descending.
void top_eigen(const CMatrix& herm, int k, RVector& values, CMatrix& vectors) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
  const Eigen::Index n = herm.rows();
  k = static_cast<int>(std::min<Eigen::Index>(k, n));
  values.resize(k);
  vectors.resize(n, k);
  for (int i = 0; i < k; ++i) {
    values[i] = std::max(es.eigenvalues()[n - 1 - i], 0.0);
    vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
}

}  // namespace

WidebandEigen wideband_eigen_from_root(const CMatrix& root, int n_rbs, int max_vectors) {
  WidebandEigen out;
  const Eigen::Index n_tx = root.cols();
  if (root.rows() < n_tx) {
    RVector lam;
    CMatrix u;
    top_eigen(root * root.adjoint(), max_vectors, lam, u);
    out.values = lam / static_cast<double>(n_rbs);
    out.vectors.resize(n_tx, lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (lam[i] > 0.0) {
        out.vectors.col(i) = root.adjoint() * u.col(i) / std::sqrt(lam[i]);
      } else {
        out.vectors.col(i).setZero();
        out.vectors(i % n_tx, i) = 1.0;
      }
    }
  } else {
    RVector lam;
    top_eigen(root.adjoint() * root, max_vectors, lam, out.vectors);
    out.values = lam / static_cast<double>(n_rbs);
  }
  // Gram eigenvalues resolve sigma only down to ~1e-8 sigma_max. Near-singular
  // roots go through an SVD so the 1e-9 rank cut in svd_precoder is meaningful.
  const Eigen::Index k = out.values.size();
  if (k > 1 && out.values[k - 1] < 1e-12 * out.values[0]) {
    Eigen::BDCSVD<CMatrix> svd(root, Eigen::ComputeThinV);
    const Eigen::Index m = std::min<Eigen::Index>(k, svd.singularValues().size());
    out.values = RVector::Zero(k);
    out.values.head(m) = svd.singularValues().head(m).array().square() / static_cast<double>(n_rbs);
    out.vectors.leftCols(m) = svd.matrixV().leftCols(m);
  }
  return out;
}

WidebandEigen wideband_eigen(std::span<const CMatrix> per_rb, int max_vectors) {
  if (per_rb.empty()) throw std::invalid_argument("wideband_eigen: no RB matrices");
  const Eigen::Index rows = per_rb.front().rows();
  CMatrix stacked(rows * static_cast<Eigen::Index>(per_rb.size()), per_rb.front().cols());
  for (std::size_t i = 0; i < per_rb.size(); ++i) stacked.middleRows(rows * static_cast<Eigen::Index>(i), rows) = per_rb[i];
  return wideband_eigen_from_root(stacked, static_cast<int>(per_rb.size()), max_vectors);
}

CMatrix covariance_root(std::span<const CMatrix> cluster_matrices, const CMatrix& phasors) {
  const Eigen::Index n = phasors.rows();
  const CMatrix c = phasors.conjugate() * phasors.transpose();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
  // B = Lambda^{1/2} U^H so that C = B^H B.
  CMatrix b = es.eigenvectors().adjoint();
  for (Eigen::Index i = 0; i < n; ++i) b.row(i) *= std::sqrt(std::max(es.eigenvalues()[i], 0.0));
  const Eigen::Index n_rx = cluster_matrices.front().rows();
  CMatrix root = CMatrix::Zero(n * n_rx, cluster_matrices.front().cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (es.eigenvalues()[i] <= 0.0) continue;
    auto block = root.middleRows(i * n_rx, n_rx);
    for (Eigen::Index m = 0; m < n; ++m) block.noalias() += b(i, m) * cluster_matrices[static_cast<std::size_t>(m)];
  }
  return root;
}

Precoder svd_precoder(const WidebandEigen& eig, int n_layers, const SvdPrecoderOptions& opts) {
  if (n_layers < 1) throw std::invalid_argument("svd_precoder: n_layers must be >= 1");
  if (n_layers > eig.values.size())
    throw std::invalid_argument("svd_precoder: n_layers exceeds the channel dimensions");
  const double lam_max = eig.values.size() > 0 ? eig.values[0] : 0.0;
  int rank = 0;
  while (rank < n_layers && (rank == 0 || eig.values[rank] > 1e-18 * lam_max)) ++rank;

  Precoder p;
  p.matrix = eig.vectors.leftCols(rank);
  p.layer_power.assign(static_cast<std::size_t>(rank), 1.0 / rank);
  if (opts.water_filling && lam_max > 0.0) {
    // Classic water level over the active modes; drop modes that go negative.
    int active = rank;
    std::vector<double> pw(static_cast<std::size_t>(rank), 0.0);
    while (active > 0) {
      double inv_sum = 0.0;
      for (int i = 0; i < active; ++i) inv_sum += opts.noise_power / eig.values[i];
      const double mu = (1.0 + inv_sum) / active;
      if (mu - opts.noise_power / eig.values[active - 1] > 0.0) {
        for (int i = 0; i < active; ++i) pw[static_cast<std::size_t>(i)] = mu - opts.noise_power / eig.values[i];
        break;
      }
      --active;
    }
    p.matrix = eig.vectors.leftCols(active);
    p.layer_power.assign(pw.begin(), pw.begin() + active);
  }
  return p;
}

Precoder svd_precoder(std::span<const CMatrix> per_rb, int n_layers, const SvdPrecoderOptions& opts) {
  const int max_dim = static_cast<int>(std::min(per_rb.front().rows() * static_cast<Eigen::Index>(per_rb.size()),
                                                per_rb.front().cols()));
  if (n_layers > std::min<Eigen::Index>(per_rb.front().rows(), per_rb.front().cols()))
    throw std::invalid_argument("svd_precoder: n_layers exceeds min(n_rx, n_tx)");
  return svd_precoder(wideband_eigen(per_rb, std::min(max_dim, n_layers)), n_layers, opts);
}

int select_rank(const RVector& eigenvalues, double noise_power, int max_rank) {
  if (max_rank < 1) throw std::invalid_argument("select_rank: max_rank must be >= 1");
  max_rank = static_cast<int>(std::min<Eigen::Index>(max_rank, eigenvalues.size()));
  int best_r = 1;
  double best = -1.0;
  for (int r = 1; r <= max_rank; ++r) {
    double c = 0.0;
    for (int i = 0; i < r; ++i) c += std::log2(1.0 + eigenvalues[i] / (r * noise_power));
    if (c > best) {
      best = c;
      best_r = r;
    }
  }
  return best_r;
}

int select_rank(std::span<const CMatrix> per_rb, double noise_power, int max_rank) {
  const auto min_dim = std::min(per_rb.front().rows(), per_rb.front().cols());
  if (max_rank > min_dim) throw std::invalid_argument("select_rank: max_rank exceeds min(n_rx, n_tx)");
  return select_rank(wideband_eigen(per_rb, max_rank).values, noise_power, max_rank);
}

ZfSolution zf_from_gram(const CMatrix& gram, double noise_power) {
  ZfSolution z;
  const Eigen::Index n = gram.rows();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(gram);
  const double lmin = es.eigenvalues()[0], lmax = es.eigenvalues()[n - 1];
  z.condition = lmin > 0.0 ? std::sqrt(lmax / lmin) : std::numeric_limits<double>::infinity();
  if (!(z.condition <= kZfMaxCondition)) return z;
  const CMatrix inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                      es.eigenvectors().adjoint();
  z.coefficients = inv;
  z.sinr.resize(static_cast<std::size_t>(n));
  z.gain.resize(static_cast<std::size_t>(n));
  const double p = 1.0 / static_cast<double>(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const double col_norm2 = std::real(inv(l, l));
    z.coefficients.col(l) /= std::sqrt(col_norm2);
    z.gain[static_cast<std::size_t>(l)] = 1.0 / col_norm2;
    z.sinr[static_cast<std::size_t>(l)] = p / (col_norm2 * noise_power);
  }
  z.ok = true;
  return z;
}

ZfResult zf_mu_precoder(std::span<const CMatrix> effective, double noise_power) {
  ZfResult res;
  if (effective.empty()) return res;
  Eigen::Index total = 0;
  for (const auto& e : effective) total += e.rows();
  const Eigen::Index n_tx = effective.front().cols();
  if (total > n_tx) throw std::invalid_argument("zf_mu_precoder: more layers than transmit ports");
  CMatrix stacked(total, n_tx);
  Eigen::Index row = 0;
  for (const auto& e : effective) {
    stacked.middleRows(row, e.rows()) = e;
    row += e.rows();
  }
  const ZfSolution z = zf_from_gram(stacked * stacked.adjoint(), noise_power);
  res.condition = z.condition;
  if (!z.ok) return res;
  const CMatrix w = stacked.adjoint() * z.coefficients;
  row = 0;
  for (const auto& e : effective) {
    Precoder p;
    p.matrix = w.middleCols(row, e.rows());
    p.layer_power.assign(static_cast<std::size_t>(e.rows()), 1.0 / static_cast<double>(total));
    res.precoders.push_back(std::move(p));
    res.layer_sinr.emplace_back(z.sinr.begin() + row, z.sinr.begin() + row + e.rows());
    row += e.rows();
  }
  res.ok = true;
  return res;
}

CMatrix average_covariance(std::span<const CMatrix> per_rb) {
  CMatrix r = CMatrix::Zero(per_rb.front().cols(), per_rb.front().cols());
  for (const auto& h : per_rb) r.noalias() += h.adjoint() * h;
  return r / static_cast<double>(per_rb.size());
}

Precoder dft_beam_assignment(const CMatrix& covariance, const Codebook& codebook, int n_groups,
                             int n_layers) {
  const int per_group = codebook.n1 * codebook.n2;
  if (covariance.rows() != per_group * n_groups)
    throw std::invalid_argument("dft_beam_assignment: covariance size does not match codebook");
  if (n_layers < 1 || n_layers > per_group * n_groups)
    throw std::invalid_argument("dft_beam_assignment: n_layers exceeds one orthogonal subgroup");
  const double scale = std::max(std::real(covariance.trace()), 1e-300);

  Precoder best;
  double best_total = -1.0;
  for (int sg = 0; sg < codebook.n_subgroups(); ++sg) {
    const std::vector<int> beams = codebook.subgroup(sg);
    // Candidate (beam, group) pairs, beam-major so both polarizations of a beam sit together.
    const auto n_cand = static_cast<Eigen::Index>(beams.size()) * n_groups;
    CMatrix x = CMatrix::Zero(covariance.rows(), n_cand);
    for (std::size_t i = 0; i < beams.size(); ++i)
      for (int g = 0; g < n_groups; ++g)
        x.block(g * per_group, static_cast<Eigen::Index>(i) * n_groups + g, per_group, 1) = codebook.beams.col(beams[i]);
    const CMatrix gram = x.adjoint() * covariance * x;

    std::vector<Eigen::Index> chosen;
    std::vector<Eigen::Index> pivots;  // picks with non-negligible new energy
    std::vector<char> used(static_cast<std::size_t>(n_cand), 0);
    double total = 0.0;
    // Rows of `l_inv_g` hold L^{-1} G_{S,:} for the Cholesky factor L of G_SS.
    CMatrix l_inv_g(0, n_cand);
    for (int layer = 0; layer < n_layers; ++layer) {
      Eigen::Index pick = -1;
      double pick_score = -1.0;
      for (Eigen::Index j = 0; j < n_cand; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double score = std::real(gram(j, j)) - l_inv_g.col(j).squaredNorm();
        if (score > pick_score + 1e-12 * scale) {
          pick_score = score;
          pick = j;
        }
      }
      used[static_cast<std::size_t>(pick)] = 1;
      chosen.push_back(pick);
      total += std::max(pick_score, 0.0);
      if (pick_score > 1e-12 * scale) {
        // Extend the factor: new row = (G_{j,:} - (L^{-1} G_{S,j})^H L^{-1} G_{S,:}) / sqrt(score).
        CMatrix row = gram.row(pick) - l_inv_g.col(pick).adjoint() * l_inv_g;
        row /= std::sqrt(pick_score);
        l_inv_g.conservativeResize(l_inv_g.rows() + 1, Eigen::NoChange);
        l_inv_g.row(l_inv_g.rows() - 1) = row;
        pivots.push_back(pick);
      }
    }
    if (total > best_total + 1e-12 * scale) {
      best_total = total;
      best = Precoder{};
      best.matrix.resize(covariance.rows(), n_layers);
      for (int l = 0; l < n_layers; ++l) {
        const Eigen::Index j = chosen[static_cast<std::size_t>(l)];
        best.matrix.col(l) = x.col(j);
        best.beam_ids.push_back(beams[static_cast<std::size_t>(j / n_groups)]);
        best.beam_groups.push_back(static_cast<int>(j % n_groups));
      }
      best.layer_power.assign(static_cast<std::size_t>(n_layers), 1.0 / n_layers);
    }
  }
  return best;
}

Precoder dft_beam_assignment(std::span<const CMatrix> per_rb, const Codebook& codebook,
                             int n_groups, int n_layers) {
  return dft_beam_assignment(average_covariance(per_rb), codebook, n_groups, n_layers);
}

double covariance_capacity(const CMatrix& covariance, const CMatrix& scaled_precoder,
                           double noise_power) {
  const Eigen::Index l = scaled_precoder.cols();
  const CMatrix m = CMatrix::Identity(l, l) + scaled_precoder.adjoint() * covariance * scaled_precoder / noise_power;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  double c = 0.0;
  for (Eigen::Index i = 0; i < l; ++i) c += std::log2(std::max(es.eigenvalues()[i], 1e-300));
  return c;
}

}  // namespace xmimo
