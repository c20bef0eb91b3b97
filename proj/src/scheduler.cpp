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

#include "xmimo/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xmimo {

Mode parse_mode(const std::string& s) {
  if (s == "su") return Mode::su;
  if (s == "mu") return Mode::mu;
  throw ConfigError("mode must be \"su\" or \"mu\", got \"" + s + "\"");
}

std::string to_string(Mode m) { return m == Mode::su ? "su" : "mu"; }

void SchedulerConfig::validate() const {
  if (!(pf_window >= 1.0)) throw ConfigError("scheduler.pf_window must be >= 1");
  if (fairness_exponent < 0.0) throw ConfigError("scheduler.fairness_exponent must be >= 0");
  if (!(epsilon_rate > 0.0)) throw ConfigError("scheduler.epsilon_rate must be > 0");
  if (max_paired < 1) throw ConfigError("scheduler.max_paired must be >= 1");
  if (mu_max_rank < 1) throw ConfigError("scheduler.mu_max_rank must be >= 1");
  if (max_layers_su < 1) throw ConfigError("scheduler.max_layers_su must be >= 1");
  if (max_total_layers < 1) throw ConfigError("scheduler.max_total_layers must be >= 1");
  if (overhead < 0.0 || overhead >= 1.0) throw ConfigError("overhead must be in [0, 1)");
}

double pf_metric(double instantaneous_rate, double average_rate, double fairness_exponent) {
  return instantaneous_rate / std::pow(average_rate, fairness_exponent);
}

int ScheduleDecision::total_layers() const {
  int n = 0;
  for (const auto& u : ues) n += u.rank;
  return n;
}

namespace {

CMatrix sub_gram(const CellCandidates& cell, const std::vector<int>& members) {
  int n = 0;
  for (int m : members) n += cell.candidates[static_cast<std::size_t>(m)].mu_rank;
  CMatrix g(n, n);
  int ri = 0;
  for (int a : members) {
    const int ra = cell.candidates[static_cast<std::size_t>(a)].mu_rank;
    int ci = 0;
    for (int b : members) {
      const int rb = cell.candidates[static_cast<std::size_t>(b)].mu_rank;
      g.block(ri, ci, ra, rb) = cell.mu_gram.block(cell.mu_offset[static_cast<std::size_t>(a)],
                                                   cell.mu_offset[static_cast<std::size_t>(b)], ra, rb);
      ci += rb;
    }
    ri += ra;
  }
  return g;
}

double weighted_rate(const CellCandidates& cell, const std::vector<int>& members,
                     const std::vector<double>& weights, const SchedulerConfig& cfg,
                     const Eigen::Ref<const RVector>& inv_diag) {
  const double p = 1.0 / static_cast<double>(inv_diag.size());
  double obj = 0.0;
  int l = 0;
  for (int m : members) {
    const Candidate& c = cell.candidates[static_cast<std::size_t>(m)];
    double se = 0.0;
    for (int k = 0; k < c.mu_rank; ++k, ++l)
      se += se_from_sinr(p / (inv_diag[l] * c.noise), cfg.se_cap, cfg.implementation_loss_db);
    obj += weights[static_cast<std::size_t>(m)] * cfg.rate(se);
  }
  return obj;
}

// Inverse Gram of the current stack. A candidate is screened by growing the
// inverse through its Schur complement instead of refactoring the whole stack.
struct Screen {
  const CellCandidates& cell;
  std::vector<int> rows;
  CMatrix ginv;

  void append_rows(int m) {
    const Candidate& c = cell.candidates[static_cast<std::size_t>(m)];
    for (int k = 0; k < c.mu_rank; ++k) rows.push_back(cell.mu_offset[static_cast<std::size_t>(m)] + k);
  }

  bool init(int first) {
    append_rows(first);
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const CMatrix g = cell.mu_gram.block(rows.front(), rows.front(), n, n);
    Eigen::LLT<CMatrix> llt(g);
    if (llt.info() != Eigen::Success) return false;
    ginv = llt.solve(CMatrix::Identity(n, n));
    return true;
  }

  void accept(int m, const ZfSolution& zf) {
    append_rows(m);
    ginv = zf.coefficients;
    for (Eigen::Index l = 0; l < ginv.cols(); ++l) ginv.col(l) /= std::sqrt(zf.gain[static_cast<std::size_t>(l)]);
  }

  double objective(std::vector<int>& trial, const std::vector<double>& weights,
                   const SchedulerConfig& cfg) const {
    const int j = trial.back();
    const Eigen::Index m = cell.candidates[static_cast<std::size_t>(j)].mu_rank;
    const Eigen::Index o = cell.mu_offset[static_cast<std::size_t>(j)];
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    CMatrix b(n, m);
    for (Eigen::Index i = 0; i < n; ++i) b.row(i) = cell.mu_gram.block(rows[static_cast<std::size_t>(i)], o, 1, m);
    const CMatrix c = ginv * b;
    const CMatrix schur = cell.mu_gram.block(o, o, m, m) - b.adjoint() * c;
    Eigen::LLT<CMatrix> llt(schur);
    if (llt.info() != Eigen::Success) return -1.0;
    const CMatrix sinv = llt.solve(CMatrix::Identity(m, m));
    RVector d(n + m);
    for (Eigen::Index i = 0; i < n; ++i)
      d[i] = std::real(ginv(i, i)) + std::real((c.row(i) * sinv * c.row(i).adjoint())(0, 0));
    for (Eigen::Index k = 0; k < m; ++k) d[n + k] = std::real(sinv(k, k));
    if (!(d.minCoeff() > 0.0) || !d.allFinite()) return -1.0;
    return weighted_rate(cell, trial, weights, cfg, d);
  }
};

}  // namespace

double mu_objective(const CellCandidates& cell, const std::vector<int>& members,
                    const std::vector<double>& weights, const SchedulerConfig& cfg,
                    ZfSolution* zf_out) {
  const ZfSolution zf = zf_from_gram(sub_gram(cell, members), 1.0);
  if (!zf.ok) {
    if (zf_out) *zf_out = zf;
    return -1.0;
  }
  RVector inv_diag(static_cast<Eigen::Index>(zf.gain.size()));
  for (std::size_t i = 0; i < zf.gain.size(); ++i) inv_diag[static_cast<Eigen::Index>(i)] = 1.0 / zf.gain[i];
  const double obj = weighted_rate(cell, members, weights, cfg, inv_diag);
  if (zf_out) *zf_out = zf;
  return obj;
}

Pairing greedy_mu_pairing(const CellCandidates& cell, const std::vector<int>& order,
                          const std::vector<double>& weights, const SchedulerConfig& cfg) {
  Pairing p;
  if (order.empty()) return p;
  const int first = order.front();
  const Candidate& c0 = cell.candidates[static_cast<std::size_t>(first)];
  p.members = {first};
  p.ranks = {c0.su_rank};
  p.single_user = true;
  p.objective = weights[static_cast<std::size_t>(first)] * c0.su_rate;
  p.objective_trace = {p.objective};

  std::vector<int> remaining(order.begin() + 1, order.end());
  int layers = c0.mu_rank;
  Screen screen{cell, {}, {}};
  if (!screen.init(first)) return p;
  while (static_cast<int>(p.members.size()) < cfg.max_paired && !remaining.empty()) {
    int best_pos = -1;
    double best_obj = p.objective;
    std::vector<int> trial = p.members;
    trial.push_back(-1);
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const int j = remaining[i];
      if (layers + cell.candidates[static_cast<std::size_t>(j)].mu_rank > cfg.max_total_layers) continue;
      trial.back() = j;
      const double obj = screen.objective(trial, weights, cfg);
      if (obj > best_obj) {
        best_obj = obj;
        best_pos = static_cast<int>(i);
      }
    }
    if (best_pos < 0) break;
    const int j = remaining[static_cast<std::size_t>(best_pos)];
    trial.back() = j;
    ZfSolution zf;
    const double exact = mu_objective(cell, trial, weights, cfg, &zf);
    remaining.erase(remaining.begin() + best_pos);
    // Ill-conditioned stacks are rejected outright; the candidate is dropped.
    if (!zf.ok || !(exact > p.objective)) continue;
    p.members = trial;
    screen.accept(j, zf);
    p.single_user = false;
    p.objective = exact;
    p.objective_trace.push_back(exact);
    p.zf_coefficients = zf.coefficients;
    p.layer_sinr = zf.sinr;
    layers += cell.candidates[static_cast<std::size_t>(j)].mu_rank;
  }
  if (!p.single_user) {
    p.ranks.clear();
    int l = 0;
    for (int m : p.members) {
      const Candidate& c = cell.candidates[static_cast<std::size_t>(m)];
      p.ranks.push_back(c.mu_rank);
      // zf_from_gram was run with unit noise; rescale to each member's noise.
      for (int k = 0; k < c.mu_rank; ++k, ++l) p.layer_sinr[static_cast<std::size_t>(l)] /= c.noise;
    }
  }
  return p;
}

namespace {

std::vector<double> pf_weights(const PfState& pf, const SchedulerConfig& cfg) {
  std::vector<double> w(pf.average.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = pf_metric(1.0, pf.average[i], cfg.fairness_exponent);
  return w;
}

std::vector<int> pf_order(const CellCandidates& cell, const std::vector<double>& w) {
  std::vector<int> order(cell.candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = cell.candidates[static_cast<std::size_t>(a)].su_rate * w[static_cast<std::size_t>(a)];
    const double sb = cell.candidates[static_cast<std::size_t>(b)].su_rate * w[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return cell.candidates[static_cast<std::size_t>(a)].ue < cell.candidates[static_cast<std::size_t>(b)].ue;
  });
  return order;
}

}  // namespace

ScheduleDecision decide(const CellCandidates& cell, const PfState& pf, Mode mode,
                        const SchedulerConfig& cfg, long tti) {
  ScheduleDecision d;
  d.tti = tti;
  d.cell = cell.cell;
  d.mode = mode;
  if (cell.candidates.empty()) return d;
  const std::vector<double> w = pf_weights(pf, cfg);
  const std::vector<int> order = pf_order(cell, w);

  auto score = [&](int i) {
    return cell.candidates[static_cast<std::size_t>(i)].su_rate * w[static_cast<std::size_t>(i)];
  };

  if (mode == Mode::su) {
    const int top = order.front();
    const Candidate& c = cell.candidates[static_cast<std::size_t>(top)];
    ScheduledUe s;
    s.ue = top;
    s.rank = c.su_rank;
    s.pf_metric = score(top);
    d.ues.push_back(s);
    d.coefficients = CMatrix::Identity(c.su_rank, c.su_rank) / std::sqrt(static_cast<double>(c.su_rank));
    return d;
  }

  const Pairing p = greedy_mu_pairing(cell, order, w, cfg);
  d.multi_user = !p.single_user;
  int offset = 0;
  for (std::size_t k = 0; k < p.members.size(); ++k) {
    ScheduledUe s;
    s.ue = p.members[k];
    s.rank = p.ranks[k];
    s.layer_offset = offset;
    s.pf_metric = score(p.members[k]);
    offset += s.rank;
    d.ues.push_back(s);
  }
  if (d.multi_user)
    d.coefficients = p.zf_coefficients / std::sqrt(static_cast<double>(offset));
  else
    d.coefficients = CMatrix::Identity(offset, offset) / std::sqrt(static_cast<double>(offset));
  return d;
}

ScheduleDecision run_tti(const CellCandidates& cell, PfState& pf, Mode mode,
                         const SchedulerConfig& cfg, long tti, const LinkEvaluator& evaluate,
                         double tti_seconds) {
  if (pf.average.size() != cell.candidates.size()) pf.reset(cell.candidates.size(), cfg.epsilon_rate);
  ScheduleDecision d = decide(cell, pf, mode, cfg, tti);
  if (evaluate) evaluate(d);
  std::vector<double> served(cell.candidates.size(), 0.0);
  for (const auto& s : d.ues) served[static_cast<std::size_t>(s.ue)] = s.achieved_bits / tti_seconds;
  const double a = 1.0 / cfg.pf_window;
  for (std::size_t i = 0; i < pf.average.size(); ++i)
    pf.average[i] = (1.0 - a) * pf.average[i] + a * served[i];
  // Keep the bootstrap floor so PF weights stay finite.
  for (double& v : pf.average) v = std::max(v, cfg.epsilon_rate * 1e-12);
  return d;
}

}  // namespace xmimo
