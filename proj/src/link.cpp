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

#include "xmimo/link.hpp"

#include <algorithm>
#include <cmath>

namespace xmimo {

namespace {

RVector mmse_sinr_eigen(const Eigen::Ref<const CMatrix>& own_layers,
                        const Eigen::Ref<const CMatrix>& interference_plus_noise) {
  const Eigen::Index l = own_layers.cols();
  Eigen::LLT<CMatrix> chol(interference_plus_noise);
  if (chol.info() != Eigen::Success) throw std::runtime_error("mmse_sinr: covariance not positive definite");
  CMatrix b = own_layers;
  chol.matrixL().solveInPlace(b);
  CMatrix m = CMatrix::Identity(l, l);
  m.noalias() += b.adjoint() * b;
  const CMatrix minv = m.llt().solve(CMatrix::Identity(l, l));
  RVector sinr(l);
  for (Eigen::Index i = 0; i < l; ++i) sinr[i] = std::max(1.0 / std::real(minv(i, i)) - 1.0, 0.0);
  return sinr;
}

constexpr int kSmall = 16;

// Plain complex products; std::complex operator* carries NaN recovery that
// dominates at these sizes.
inline cdouble mul(cdouble a, cdouble b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline cdouble conj_mul(cdouble a, cdouble b) {
  return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}

// In-place lower Cholesky of an n x n column-major Hermitian matrix.
bool cholesky_small(cdouble* a, int n) {
  for (int j = 0; j < n; ++j) {
    double d = a[j + j * n].real();
    for (int k = 0; k < j; ++k) d -= std::norm(a[j + k * n]);
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    a[j + j * n] = d;
    for (int i = j + 1; i < n; ++i) {
      cdouble v = a[i + j * n];
      for (int k = 0; k < j; ++k) v -= conj_mul(a[j + k * n], a[i + k * n]);
      a[i + j * n] = v * (1.0 / d);
    }
  }
  return true;
}

// Solves L X = B in place; B is n x m column-major.
void forward_small(const cdouble* l, int n, cdouble* b, int m) {
  for (int c = 0; c < m; ++c) {
    cdouble* x = b + c * n;
    for (int i = 0; i < n; ++i) {
      cdouble v = x[i];
      for (int k = 0; k < i; ++k) v -= mul(l[i + k * n], x[k]);
      x[i] = v * (1.0 / l[i + i * n].real());
    }
  }
}

RVector mmse_sinr_small(const Eigen::Ref<const CMatrix>& own_layers,
                        const Eigen::Ref<const CMatrix>& r) {
  const int n = static_cast<int>(own_layers.rows());
  const int l = static_cast<int>(own_layers.cols());
  cdouble chol[kSmall * kSmall], b[kSmall * kSmall], m[kSmall * kSmall], inv[kSmall * kSmall];
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) chol[i + j * n] = r(i, j);
  if (!cholesky_small(chol, n)) throw std::runtime_error("mmse_sinr: covariance not positive definite");
  for (int j = 0; j < l; ++j)
    for (int i = 0; i < n; ++i) b[i + j * n] = own_layers(i, j);
  forward_small(chol, n, b, l);
  for (int j = 0; j < l; ++j)
    for (int i = j; i < l; ++i) {
      cdouble v = i == j ? 1.0 : 0.0;
      for (int k = 0; k < n; ++k) v += conj_mul(b[k + i * n], b[k + j * n]);
      m[i + j * l] = v;
    }
  if (!cholesky_small(m, l)) throw std::runtime_error("mmse_sinr: inner matrix not positive definite");
  std::fill(inv, inv + l * l, cdouble{});
  for (int i = 0; i < l; ++i) inv[i + i * l] = 1.0;
  forward_small(m, l, inv, l);
  // diag(M^-1) = squared column norms of L^-1.
  RVector sinr(l);
  for (int i = 0; i < l; ++i) {
    double d = 0.0;
    for (int k = i; k < l; ++k) d += std::norm(inv[k + i * l]);
    sinr[i] = std::max(1.0 / d - 1.0, 0.0);
  }
  return sinr;
}

}  // namespace

RVector mmse_sinr(const Eigen::Ref<const CMatrix>& own_layers,
                  const Eigen::Ref<const CMatrix>& interference_plus_noise) {
  if (own_layers.rows() <= kSmall && own_layers.cols() <= kSmall)
    return mmse_sinr_small(own_layers, interference_plus_noise);
  return mmse_sinr_eigen(own_layers, interference_plus_noise);
}

RVector mmse_sinr(const CMatrix& channel, const CMatrix& own_precoder,
                  std::span<const Interferer> interferers, double noise_power) {
  if (!(noise_power > 0.0)) throw std::invalid_argument("mmse_sinr: noise_power must be > 0");
  const Eigen::Index n_rx = channel.rows();
  CMatrix r = noise_power * CMatrix::Identity(n_rx, n_rx);
  for (const Interferer& i : interferers) {
    const CMatrix hw = (*i.channel) * (*i.precoder);
    r.noalias() += hw * hw.adjoint();
  }
  return mmse_sinr(channel * own_precoder, r);
}

double se_from_sinr(double sinr, double se_cap, double attenuation_db) {
  return std::min(std::log2(1.0 + std::max(sinr, 0.0) / db2lin(attenuation_db)), se_cap);
}

void map_spectral_efficiency(LinkState& link, double se_cap, double attenuation_db) {
  link.se = link.sinr.unaryExpr([&](double s) { return se_from_sinr(s, se_cap, attenuation_db); });
}

double tti_throughput(const LinkState& link, double rb_group_bw, double overhead_fraction) {
  if (overhead_fraction < 0.0 || overhead_fraction >= 1.0)
    throw std::invalid_argument("tti_throughput: overhead_fraction must be in [0, 1)");
  if (link.se.size() == 0) return 0.0;
  return (1.0 - overhead_fraction) * link.se.sum() * rb_group_bw;
}

}  // namespace xmimo
