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

#include <functional>
#include <string>
#include <vector>

#include "xmimo/common.hpp"
#include "xmimo/link.hpp"
#include "xmimo/precoding.hpp"

namespace xmimo {

enum class Mode { su, mu };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

struct SchedulerConfig {
  double pf_window = 100.0;  // TTIs of exponential forgetting
  double fairness_exponent = 1.0;
  double epsilon_rate = 1.0;  // bps, bootstraps the PF averages
  int max_paired = 8;
  int mu_max_rank = 2;
  int max_layers_su = 8;
  int max_total_layers = 16;
  // Rate estimation
  double bandwidth = 100e6;
  double overhead = kDefaultOverhead;
  double se_cap = kSeCap256Qam;
  double implementation_loss_db = kDefaultImplementationLossDb;

  void validate() const;
  double rate(double se_sum) const { return (1.0 - overhead) * bandwidth * se_sum; }
};

/// instantaneous / average^exponent.
double pf_metric(double instantaneous_rate, double average_rate, double fairness_exponent);

/// Scheduler-side view of one UE for the current TTI.
struct Candidate {
  int ue = 0;
  double su_rate = 0.0;  // estimated SU rate at su_rank, bps
  int su_rank = 1;
  int mu_rank = 1;
  double noise = 1.0;  // interference-plus-noise used for ZF SINR estimates
};

/// Everything the scheduler knows about one cell. `mu_gram` is the Gram
/// matrix E E^H of all candidates' MU effective channels stacked in candidate
/// order; candidate i owns rows [mu_offset[i], mu_offset[i] + mu_rank).
struct CellCandidates {
  int cell = 0;
  std::vector<Candidate> candidates;
  CMatrix mu_gram;
  std::vector<int> mu_offset;
};

/// Outcome of MU pairing. Members are candidate indices in acceptance order.
struct Pairing {
  std::vector<int> members;
  std::vector<int> ranks;
  bool single_user = true;  // one member transmitting its SU rank
  CMatrix zf_coefficients;  // Gamma^-1 with unit-norm columns, MU only
  std::vector<double> layer_sinr;  // scheduler estimate, MU only
  std::vector<double> objective_trace;  // weighted-sum objective after each acceptance
  double objective = 0.0;
};

/// Greedy MU pairing. `order` lists candidate indices sorted by PF score
/// (descending); `weights` are the PF weights 1/avg^exponent per candidate.
Pairing greedy_mu_pairing(const CellCandidates& cell, const std::vector<int>& order,
                          const std::vector<double>& weights, const SchedulerConfig& cfg);

/// Weighted-sum objective of a fixed member set with ZF (MU ranks), or
/// nullopt-equivalent -1 when the ZF stack is rejected. Exposed for oracles.
double mu_objective(const CellCandidates& cell, const std::vector<int>& members,
                    const std::vector<double>& weights, const SchedulerConfig& cfg,
                    ZfSolution* zf_out = nullptr);

struct ScheduledUe {
  int ue = 0;  // candidate index within the cell
  int rank = 0;
  int layer_offset = 0;  // first column of this UE in the decision's layers
  std::vector<double> layer_sinr;  // wideband mean of the realized per-RB SINR
  double achieved_bits = 0.0;
  double pf_metric = 0.0;
};

struct ScheduleDecision {
  long tti = 0;
  int cell = 0;
  Mode mode = Mode::su;
  std::vector<ScheduledUe> ues;
  bool multi_user = false;
  /// Precoder coefficients on the scheduled UEs' bases: rows follow the
  /// members' basis columns (first `rank` columns of each), columns are layers.
  /// Layer power is already folded in.
  CMatrix coefficients;

  int total_layers() const;
};

/// Per-cell PF bookkeeping.
struct PfState {
  std::vector<double> average;  // indexed by candidate position in the cell

  void reset(std::size_t n, double epsilon) { average.assign(n, epsilon); }
};

/// Fills each ScheduledUe's realized SINRs and achieved bits (for one TTI).
using LinkEvaluator = std::function<void(ScheduleDecision&)>;

/// One TTI in one cell: pick UEs (SU: top PF with its selected rank; MU:
/// greedy pairing), evaluate the link, update PF averages.
ScheduleDecision run_tti(const CellCandidates& cell, PfState& pf, Mode mode,
                         const SchedulerConfig& cfg, long tti, const LinkEvaluator& evaluate,
                         double tti_seconds = 1e-3);

/// Decision that run_tti would take, without evaluating or updating PF.
ScheduleDecision decide(const CellCandidates& cell, const PfState& pf, Mode mode,
                        const SchedulerConfig& cfg, long tti);

}  // namespace xmimo
