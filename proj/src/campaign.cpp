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

#include "xmimo/campaign.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xmimo/kernels.hpp"
#include "xmimo/link.hpp"
#include "xmimo/precoding.hpp"
#include "xmimo/rng.hpp"

namespace xmimo {

double CampaignConfig::noise_dbm() const {
  return -174.0 + lin2db(bandwidth) + noise_figure_db;
}

void CampaignConfig::finalize() {
  if (!seed) throw ConfigError("seed: required (no default seed)");
  if (n_drops < 1) throw ConfigError("n_drops must be >= 1");
  if (ttis_per_drop < 1) throw ConfigError("ttis_per_drop must be >= 1");
  if (warmup_ttis < 0) throw ConfigError("warmup_ttis must be >= 0");
  if (ues_per_cell < 1) throw ConfigError("ues_per_cell must be >= 1");
  if (!(isd > 0.0)) throw ConfigError("isd must be > 0");
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");
  if (n_rb_groups < 1) throw ConfigError("n_rb_groups must be >= 1");
  if (!(carrier > 0.0)) throw ConfigError("carrier must be > 0");
  if (!(tti_seconds > 0.0)) throw ConfigError("tti_seconds must be > 0");
  if (explicit_interferers < 0) throw ConfigError("channel.explicit_interferers must be >= 0");
  if (link.se_cap <= 0.0) throw ConfigError("link.se_cap must be > 0");
  if (mode == Mode::mu && precoding.per_rb)
    throw ConfigError("precoding.per_rb is only supported in su mode");
  layout.isd = isd;
  layout.validate();
  bs_array.carrier_freq = carrier;
  ue_array.carrier_freq = carrier;
  try {
    bs_array.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("bs_array.") + e.what());
  }
  try {
    ue_array.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("ue_array.") + e.what());
  }
  scheduler.bandwidth = bandwidth;
  scheduler.overhead = overhead;
  scheduler.se_cap = link.se_cap;
  scheduler.implementation_loss_db = link.implementation_loss_db;
  scheduler.validate();
}

std::uint64_t drop_seed(std::uint64_t campaign_seed, int index) {
  return substream_key(campaign_seed, "drop", {static_cast<std::uint64_t>(index)});
}

Drop campaign_drop(const CampaignConfig& cfg, int index) {
  if (!cfg.seed) throw ConfigError("seed: required (no default seed)");
  return drop_ues(cfg.layout, cfg.ues_per_cell, drop_seed(*cfg.seed, index), cfg.bs_array);
}

double su_capacity(std::span<const CMatrix> per_rb, double noise_power) {
  double total = 0.0;
  for (const CMatrix& h : per_rb) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h * h.adjoint(), Eigen::EigenvaluesOnly);
    RVector lam = es.eigenvalues().reverse();
    // Water level over the strongest modes.
    int active = static_cast<int>(lam.size());
    while (active > 0 && !(lam[active - 1] > 0.0)) --active;
    double mu = 0.0;
    while (active > 0) {
      double inv_sum = 0.0;
      for (int i = 0; i < active; ++i) inv_sum += noise_power / lam[i];
      mu = (1.0 + inv_sum) / active;
      if (mu > noise_power / lam[active - 1]) break;
      --active;
    }
    for (int i = 0; i < active; ++i) total += std::log2(mu * lam[i] / noise_power);
  }
  return total / static_cast<double>(per_rb.size());
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Drop engine
// ---------------------------------------------------------------------------

namespace {

struct LinkChannel {
  std::vector<CMatrix> clusters;  // noise-normalized cluster matrices
  CMatrix phasors;                // n_clusters x n_rb
};

/// Products of one victim channel with every basis of one transmitting cell.
/// Row blocks of n_rx are clusters (mixed by `phasors`) or, in per-RB mode,
/// RB groups directly.
struct Product {
  int cell = 0;
  CMatrix z;
  CMatrix phasors;
  bool per_rb = false;
};

struct UeState {
  int cell = 0;
  int local = 0;
  int site = 0;
  std::vector<int> explicit_cells;
  double white = 1.0;      // thermal + non-explicit interference
  double cqi_noise = 1.0;  // thermal + all interference, as seen by the scheduler
  RVector eig_values;
  CMatrix basis;                 // n_tx x rank, wideband
  std::vector<CMatrix> rb_basis;  // per-RB bases, per-RB mode only
  int rank = 1;
  std::vector<double> power;  // per layer
  double capacity = 0.0;
  std::vector<Product> links;  // [0] = serving cell
};

/// What one cell puts on air: for each scheduled UE the offset of its basis
/// in the cell's column layout and the coefficients on those columns.
struct Transmission {
  std::vector<int> offsets;
  std::vector<CMatrix> coeffs;
  int layers = 0;
  bool empty() const { return layers == 0; }
};

struct CellState {
  std::vector<int> ues;      // global ids, candidate order
  std::vector<int> col_offset;  // basis column offset per candidate
  int n_cols = 0;
  CellCandidates cand;
  PfState pf;
};

}  // namespace

struct DropEngine::Impl {
  CampaignConfig cfg;
  Drop drop;
  std::uint64_t seed = 0;
  std::optional<int> rank_override;
  std::vector<Eigen::Vector2d> sites;
  std::vector<CellInfo> cells;
  ArrayGeometry bs, ue;
  double amp_scale = 1.0;
  int n_rx = 0, n_tx = 0, n_rb = 0;
  std::vector<UeState> ues;
  std::vector<CellState> cell_state;

  ClusterSet cluster_set(int u, int c) const {
    const CellInfo& cell = cells[static_cast<std::size_t>(c)];
    const auto s = static_cast<std::size_t>(cell.site);
    const UePlacement& p = drop.ues[static_cast<std::size_t>(u)];
    const LinkGeometry g = link_geometry(cfg.layout, cell, sites[s], p.position, p.orientation);
    const bool los = drop.los[static_cast<std::size_t>(u)][s];
    const std::uint64_t key = substream_key(seed, "link", {static_cast<std::uint64_t>(u), s});
    ClusterSet cs = generate_clusters(g, uma_channel_params(los, cfg.carrier), los, key);
    cs.pathloss_db = pathloss(g.d2d, g.d3d, cfg.carrier, los, cfg.layout);
    cs.shadowing_db = drop.shadowing_db[static_cast<std::size_t>(u)][s];
    return cs;
  }

  LinkChannel make_link(int u, int c) const {
    ClusterChannel cc = cluster_channel(cluster_set(u, c), bs, ue);
    LinkChannel out;
    for (CMatrix& m : cc.cluster_matrices) m *= amp_scale;
    out.clusters = std::move(cc.cluster_matrices);
    out.phasors = delay_phasors(cc.delays, n_rb, cfg.rb_bandwidth());
    return out;
  }

  std::vector<CMatrix> synthesize(const LinkChannel& l) const {
    return kernels::synthesize_rbs_serial(l.clusters, l.phasors);
  }

  void setup();
  void setup_ue(int u, std::vector<LinkChannel>& serving);
  void build_products(int c, std::vector<LinkChannel>& serving);
  Transmission transmission(int c, const ScheduleDecision& d) const;
  CMatrix received(const Product& p, const Transmission& tx) const;
  void evaluate(int c, ScheduleDecision& d, const std::vector<Transmission>& prev) const;
};

void DropEngine::Impl::setup() {
  sites = site_positions(cfg.layout);
  cells = cell_list(cfg.layout);
  bs = build_array(cfg.bs_array);
  ue = build_array(cfg.ue_array);
  n_rx = ue.n_ports();
  n_tx = bs.n_ports();
  n_rb = cfg.n_rb_groups;
  amp_scale = std::sqrt(db2lin(cfg.tx_power_dbm - cfg.noise_dbm()));
  const double p_over_n = db2lin(cfg.tx_power_dbm - cfg.noise_dbm());

  const int n_ue = static_cast<int>(drop.ues.size());
  const int n_cells = static_cast<int>(cells.size());
  ues.assign(static_cast<std::size_t>(n_ue), UeState{});
  cell_state.assign(static_cast<std::size_t>(n_cells), CellState{});

  for (int u = 0; u < n_ue; ++u) {
    UeState& st = ues[static_cast<std::size_t>(u)];
    const UePlacement& p = drop.ues[static_cast<std::size_t>(u)];
    st.cell = p.serving_cell;
    st.site = cells[static_cast<std::size_t>(st.cell)].site;
    CellState& cs = cell_state[static_cast<std::size_t>(st.cell)];
    st.local = static_cast<int>(cs.ues.size());
    cs.ues.push_back(u);

    // Average received power from every cell: coupling plus the subarray
    // gain towards the direct path.
    std::vector<std::pair<double, int>> gains;
    for (const CellInfo& cell : cells) {
      if (cell.id == st.cell) continue;
      const LinkGeometry g = link_geometry(cfg.layout, cell, sites[static_cast<std::size_t>(cell.site)],
                                           p.position, p.orientation);
      const double af = std::norm(subarray_factor(bs, g.aod, g.zod));
      const double lin = p_over_n * db2lin(drop.coupling_db[static_cast<std::size_t>(u)][static_cast<std::size_t>(cell.id)]) * af;
      gains.emplace_back(lin, cell.id);
    }
    std::stable_sort(gains.begin(), gains.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.explicit_interferers), gains.size());
    st.white = 1.0;
    st.cqi_noise = 1.0;
    for (std::size_t i = 0; i < gains.size(); ++i) {
      st.cqi_noise += gains[i].first;
      if (i < k)
        st.explicit_cells.push_back(gains[i].second);
      else
        st.white += gains[i].first;
    }
    st.links.resize(1 + st.explicit_cells.size());
  }

  std::vector<LinkChannel> serving(static_cast<std::size_t>(n_ue));
#pragma omp parallel for schedule(dynamic, 1)
  for (int u = 0; u < n_ue; ++u) setup_ue(u, serving);

  for (int c = 0; c < n_cells; ++c) {
    CellState& cs = cell_state[static_cast<std::size_t>(c)];
    cs.cand.cell = c;
    int col = 0, mu_row = 0;
    for (int i = 0; i < static_cast<int>(cs.ues.size()); ++i) {
      const UeState& st = ues[static_cast<std::size_t>(cs.ues[static_cast<std::size_t>(i)])];
      cs.col_offset.push_back(col);
      col += st.rank;
      Candidate cand;
      cand.ue = cs.ues[static_cast<std::size_t>(i)];
      cand.su_rank = st.rank;
      cand.mu_rank = std::min(cfg.scheduler.mu_max_rank, st.rank);
      cand.noise = st.cqi_noise;
      double se = 0.0;
      for (int l = 0; l < st.rank; ++l)
        se += se_from_sinr(st.eig_values[l] * st.power[static_cast<std::size_t>(l)] / st.cqi_noise,
                           cfg.link.se_cap, cfg.link.implementation_loss_db);
      cand.su_rate = cfg.scheduler.rate(se);
      cs.cand.candidates.push_back(cand);
      cs.cand.mu_offset.push_back(mu_row);
      mu_row += cand.mu_rank;
    }
    cs.n_cols = col;
    if (cfg.mode == Mode::mu && mu_row > 0) {
      CMatrix e(mu_row, n_tx);
      for (std::size_t i = 0; i < cs.ues.size(); ++i) {
        const UeState& st = ues[static_cast<std::size_t>(cs.ues[i])];
        const int m = cs.cand.candidates[i].mu_rank;
        for (int l = 0; l < m; ++l)
          e.row(cs.cand.mu_offset[i] + l) = std::sqrt(st.eig_values[l]) * st.basis.col(l).adjoint();
      }
      cs.cand.mu_gram = e * e.adjoint();
    }
    cs.pf.reset(cs.ues.size(), cfg.scheduler.epsilon_rate);
  }

#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < n_cells; ++c) build_products(c, serving);
}

void DropEngine::Impl::setup_ue(int u, std::vector<LinkChannel>& serving) {
  UeState& st = ues[static_cast<std::size_t>(u)];
  LinkChannel link = make_link(u, st.cell);
  const int max_rank = std::min(n_rx, n_tx);
  const CMatrix root = covariance_root(link.clusters, link.phasors);
  const WidebandEigen eig = wideband_eigen_from_root(root, n_rb, max_rank);
  st.eig_values = eig.values;
  int rank = rank_override ? std::min(*rank_override, max_rank)
                           : select_rank(eig.values, st.cqi_noise, std::min(cfg.scheduler.max_layers_su, max_rank));
  SvdPrecoderOptions opts;
  opts.water_filling = cfg.precoding.water_filling && !rank_override;
  opts.noise_power = st.cqi_noise;
  const Precoder pre = svd_precoder(eig, rank, opts);
  st.rank = pre.n_layers();
  st.power = pre.layer_power;
  st.basis = eig.vectors.leftCols(st.rank);
  const std::vector<CMatrix> rbs = synthesize(link);
  st.capacity = xmimo::su_capacity(rbs, st.cqi_noise);
  if (cfg.precoding.per_rb) {
    st.rb_basis.reserve(rbs.size());
    for (const CMatrix& h : rbs) {
      const WidebandEigen e = wideband_eigen(std::span<const CMatrix>(&h, 1), st.rank);
      st.rb_basis.push_back(e.vectors.leftCols(st.rank));
    }
  }
  serving[static_cast<std::size_t>(u)] = std::move(link);
}

void DropEngine::Impl::build_products(int c, std::vector<LinkChannel>& serving) {
  const CellState& cs = cell_state[static_cast<std::size_t>(c)];
  if (cs.ues.empty()) return;
  // Victims that see this cell: its own UEs and UEs that list it as explicit.
  std::vector<int> victims;
  for (int u = 0; u < static_cast<int>(ues.size()); ++u) {
    const UeState& st = ues[static_cast<std::size_t>(u)];
    if (st.cell == c || std::find(st.explicit_cells.begin(), st.explicit_cells.end(), c) != st.explicit_cells.end())
      victims.push_back(u);
  }
  CMatrix bcat;
  if (!cfg.precoding.per_rb) {
    bcat.resize(n_tx, cs.n_cols);
    for (std::size_t i = 0; i < cs.ues.size(); ++i) {
      const UeState& v = ues[static_cast<std::size_t>(cs.ues[i])];
      bcat.middleCols(cs.col_offset[i], v.rank) = v.basis;
    }
  }
  for (int u : victims) {
    UeState& st = ues[static_cast<std::size_t>(u)];
    const bool own = st.cell == c;
    LinkChannel tmp;
    const LinkChannel& link = own ? serving[static_cast<std::size_t>(u)] : (tmp = make_link(u, c));
    Product p;
    p.cell = c;
    if (!cfg.precoding.per_rb) {
      const Eigen::Index nc = static_cast<Eigen::Index>(link.clusters.size());
      p.z.resize(nc * n_rx, cs.n_cols);
      for (Eigen::Index n = 0; n < nc; ++n)
        p.z.middleRows(n * n_rx, n_rx).noalias() = link.clusters[static_cast<std::size_t>(n)] * bcat;
      p.phasors = link.phasors;
    } else {
      p.per_rb = true;
      const std::vector<CMatrix> rbs = synthesize(link);
      p.z.resize(static_cast<Eigen::Index>(n_rb) * n_rx, cs.n_cols);
      for (int rb = 0; rb < n_rb; ++rb)
        for (std::size_t i = 0; i < cs.ues.size(); ++i) {
          const UeState& v = ues[static_cast<std::size_t>(cs.ues[i])];
          p.z.block(static_cast<Eigen::Index>(rb) * n_rx, cs.col_offset[i], n_rx, v.rank).noalias() =
              rbs[static_cast<std::size_t>(rb)] * v.rb_basis[static_cast<std::size_t>(rb)];
        }
    }
    // Slots are pre-sized, so concurrent cells write disjoint entries.
    const std::size_t slot = own ? 0
                                 : 1 + static_cast<std::size_t>(std::find(st.explicit_cells.begin(),
                                                                          st.explicit_cells.end(), c) -
                                                                st.explicit_cells.begin());
    st.links[slot] = std::move(p);
  }
}

Transmission DropEngine::Impl::transmission(int c, const ScheduleDecision& d) const {
  const CellState& cs = cell_state[static_cast<std::size_t>(c)];
  Transmission tx;
  tx.layers = d.total_layers();
  int row = 0;
  for (const ScheduledUe& s : d.ues) {
    const UeState& v = ues[static_cast<std::size_t>(cs.ues[static_cast<std::size_t>(s.ue)])];
    tx.offsets.push_back(cs.col_offset[static_cast<std::size_t>(s.ue)]);
    CMatrix x;
    if (d.multi_user) {
      x = d.coefficients.middleRows(row, s.rank);
      for (int l = 0; l < s.rank; ++l) x.row(l) *= std::sqrt(v.eig_values[l]);
    } else {
      x = CMatrix::Zero(s.rank, tx.layers);
      for (int l = 0; l < s.rank; ++l) x(l, l) = std::sqrt(v.power[static_cast<std::size_t>(l)]);
    }
    tx.coeffs.push_back(std::move(x));
    row += s.rank;
  }
  return tx;
}

CMatrix DropEngine::Impl::received(const Product& p, const Transmission& tx) const {
  const Eigen::Index blocks = p.z.rows() / n_rx;
  CMatrix y = CMatrix::Zero(p.z.rows(), tx.layers);
  for (std::size_t k = 0; k < tx.offsets.size(); ++k)
    y.noalias() += p.z.middleCols(tx.offsets[k], tx.coeffs[k].rows()) * tx.coeffs[k];
  // Column n of m is vec() of the n-th n_rx x L block of y.
  CMatrix m(static_cast<Eigen::Index>(n_rx) * tx.layers, blocks);
  for (Eigen::Index n = 0; n < blocks; ++n)
    for (int l = 0; l < tx.layers; ++l) m.col(n).segment(static_cast<Eigen::Index>(l) * n_rx, n_rx) = y.block(n * n_rx, l, n_rx, 1);
  if (p.per_rb) return m;
  return m * p.phasors;
}

void DropEngine::Impl::evaluate(int c, ScheduleDecision& d, const std::vector<Transmission>& prev) const {
  const CellState& cs = cell_state[static_cast<std::size_t>(c)];
  const Transmission tx = transmission(c, d);
  const int layers = tx.layers;
  const double bits_per_se = (1.0 - cfg.overhead) * cfg.rb_bandwidth() * cfg.tti_seconds;
  for (ScheduledUe& s : d.ues) {
    const UeState& st = ues[static_cast<std::size_t>(cs.ues[static_cast<std::size_t>(s.ue)])];
    const CMatrix own_all = received(st.links[0], tx);
    std::vector<CMatrix> interf;
    for (std::size_t j = 0; j < st.explicit_cells.size(); ++j) {
      const int ic = st.explicit_cells[j];
      const Transmission& itx = prev[static_cast<std::size_t>(ic)];
      if (itx.empty() || st.links[j + 1].z.size() == 0) continue;
      interf.push_back(received(st.links[j + 1], itx));
    }
    s.layer_sinr.assign(static_cast<std::size_t>(s.rank), 0.0);
    int n_int = layers - s.rank;
    for (const CMatrix& t : interf) n_int += static_cast<int>(t.rows() / n_rx);
    double se_sum = 0.0;
    CMatrix f(n_rx, n_int);
    CMatrix r(n_rx, n_rx);
    for (int rb = 0; rb < n_rb; ++rb) {
      // Every column that is not one of this UE's layers interferes.
      const Eigen::Map<const CMatrix> a(own_all.col(rb).data(), n_rx, layers);
      int k = 0;
      for (int l = 0; l < layers; ++l)
        if (l < s.layer_offset || l >= s.layer_offset + s.rank) f.col(k++) = a.col(l);
      for (const CMatrix& t : interf) {
        const Eigen::Index il = t.rows() / n_rx;
        f.middleCols(k, il) = Eigen::Map<const CMatrix>(t.col(rb).data(), n_rx, il);
        k += static_cast<int>(il);
      }
      r.noalias() = f * f.adjoint();
      r.diagonal().array() += st.white;
      const RVector sinr = mmse_sinr(a.middleCols(s.layer_offset, s.rank), r);
      for (int l = 0; l < s.rank; ++l) {
        s.layer_sinr[static_cast<std::size_t>(l)] += sinr[l] / n_rb;
        se_sum += se_from_sinr(sinr[l], cfg.link.se_cap, cfg.link.implementation_loss_db);
      }
    }
    s.achieved_bits = se_sum * bits_per_se;
  }
}

DropEngine::DropEngine(const CampaignConfig& cfg, const Drop& drop, std::uint64_t seed,
                       std::optional<int> rank_override)
    : impl_(new Impl) {
  impl_->cfg = cfg;
  impl_->drop = drop;
  impl_->seed = seed;
  impl_->rank_override = rank_override;
  try {
    impl_->setup();
  } catch (...) {
    delete impl_;
    throw;
  }
}

DropEngine::~DropEngine() { delete impl_; }

std::vector<CMatrix> DropEngine::serving_channel(int u) const {
  const UeState& st = impl_->ues.at(static_cast<std::size_t>(u));
  return impl_->synthesize(impl_->make_link(u, st.cell));
}

ClusterSet DropEngine::serving_clusters(int u) const {
  return impl_->cluster_set(u, impl_->ues.at(static_cast<std::size_t>(u)).cell);
}

int DropEngine::serving_cell(int u) const { return impl_->ues.at(static_cast<std::size_t>(u)).cell; }
int DropEngine::n_ues() const { return static_cast<int>(impl_->ues.size()); }

int DropEngine::su_rank(int u) const { return impl_->ues.at(static_cast<std::size_t>(u)).rank; }
double DropEngine::cqi_noise(int u) const { return impl_->ues.at(static_cast<std::size_t>(u)).cqi_noise; }
double DropEngine::su_capacity(int u) const { return impl_->ues.at(static_cast<std::size_t>(u)).capacity; }

DropResult DropEngine::run(int drop_index, int warmup, int measured) {
  Impl& m = *impl_;
  const int n_cells = static_cast<int>(m.cells.size());
  DropResult res;
  std::vector<double> bits(m.ues.size(), 0.0);
  std::vector<long> scheduled(m.ues.size(), 0);

  std::vector<Transmission> prev(static_cast<std::size_t>(n_cells));
  for (int c = 0; c < n_cells; ++c) {
    const CellState& cs = m.cell_state[static_cast<std::size_t>(c)];
    if (cs.ues.empty()) continue;
    prev[static_cast<std::size_t>(c)] = m.transmission(c, decide(cs.cand, cs.pf, m.cfg.mode, m.cfg.scheduler, -1));
  }

  std::vector<ScheduleDecision> cur(static_cast<std::size_t>(n_cells));
  const int total = warmup + measured;
  for (int t = 0; t < total; ++t) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int c = 0; c < n_cells; ++c) {
      CellState& cs = m.cell_state[static_cast<std::size_t>(c)];
      if (cs.ues.empty()) continue;
      cur[static_cast<std::size_t>(c)] = run_tti(
          cs.cand, cs.pf, m.cfg.mode, m.cfg.scheduler, t,
          [&](ScheduleDecision& d) { m.evaluate(c, d, prev); }, m.cfg.tti_seconds);
    }
    for (int c = 0; c < n_cells; ++c) {
      const CellState& cs = m.cell_state[static_cast<std::size_t>(c)];
      if (cs.ues.empty()) continue;
      const ScheduleDecision& d = cur[static_cast<std::size_t>(c)];
      prev[static_cast<std::size_t>(c)] = m.transmission(c, d);
      if (t < warmup) continue;
      const int layers = d.total_layers();
      if (static_cast<int>(res.layer_histogram.size()) <= layers) res.layer_histogram.resize(static_cast<std::size_t>(layers) + 1, 0);
      ++res.layer_histogram[static_cast<std::size_t>(layers)];
      ++res.decisions;
      DecisionRecord rec;
      for (const ScheduledUe& s : d.ues) {
        const int u = cs.ues[static_cast<std::size_t>(s.ue)];
        bits[static_cast<std::size_t>(u)] += s.achieved_bits;
        ++scheduled[static_cast<std::size_t>(u)];
        if (m.cfg.decision_log) {
          rec.ues.push_back(u);
          rec.ranks.push_back(s.rank);
          double mean = 0.0;
          for (double v : s.layer_sinr) mean += v / static_cast<double>(s.layer_sinr.size());
          rec.mean_sinr_db.push_back(lin2db(std::max(mean, 1e-30)));
          rec.bits += s.achieved_bits;
        }
      }
      if (m.cfg.decision_log) {
        rec.drop = drop_index;
        rec.tti = t - warmup;
        rec.cell = c;
        res.decision_log.push_back(std::move(rec));
      }
    }
  }

  const double seconds = measured * m.cfg.tti_seconds;
  for (std::size_t u = 0; u < m.ues.size(); ++u) {
    const UeState& st = m.ues[u];
    UeResult r;
    r.drop = drop_index;
    r.ue = static_cast<int>(u);
    r.cell = st.cell;
    r.los = m.drop.los[u][static_cast<std::size_t>(st.site)];
    r.coupling_db = m.drop.coupling_db[u][static_cast<std::size_t>(st.cell)];
    r.throughput_bps = measured > 0 ? bits[u] / seconds : 0.0;
    r.scheduled_fraction = measured > 0 ? static_cast<double>(scheduled[u]) / measured : 0.0;
    r.su_capacity = st.capacity;
    res.ues.push_back(r);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Campaign
// ---------------------------------------------------------------------------

namespace {

DropResult simulate_drop(const CampaignConfig& cfg, int i) {
  DropEngine engine(cfg, campaign_drop(cfg, i), drop_seed(*cfg.seed, i));
  return engine.run(i, cfg.warmup_ttis, cfg.ttis_per_drop);
}

ThroughputReport merge(const CampaignConfig& cfg, std::vector<DropResult>& drops) {
  ThroughputReport rep;
  rep.scenario = cfg.scenario;
  rep.seed = *cfg.seed;
  for (DropResult& d : drops) {
    double cap = 0.0;
    for (const UeResult& u : d.ues) cap += u.su_capacity;
    rep.drop_mean_capacity.push_back(d.ues.empty() ? 0.0 : cap / static_cast<double>(d.ues.size()));
    rep.ues.insert(rep.ues.end(), d.ues.begin(), d.ues.end());
    if (rep.layer_histogram.size() < d.layer_histogram.size()) rep.layer_histogram.resize(d.layer_histogram.size(), 0);
    for (std::size_t i = 0; i < d.layer_histogram.size(); ++i) rep.layer_histogram[i] += d.layer_histogram[i];
    rep.decisions += d.decisions;
    for (auto& r : d.decision_log) rep.decision_log.push_back(std::move(r));
  }
  std::vector<double> tput;
  double sum = 0.0;
  for (const UeResult& u : rep.ues) {
    tput.push_back(u.throughput_bps);
    sum += u.throughput_bps;
  }
  rep.mean_throughput = tput.empty() ? 0.0 : sum / static_cast<double>(tput.size());
  rep.p5_throughput = percentile(tput, 5.0);
  long layers = 0, gt4 = 0;
  for (std::size_t i = 0; i < rep.layer_histogram.size(); ++i) {
    layers += static_cast<long>(i) * rep.layer_histogram[i];
    if (i > 4) gt4 += rep.layer_histogram[i];
  }
  if (rep.decisions > 0) {
    rep.mean_layers = static_cast<double>(layers) / static_cast<double>(rep.decisions);
    rep.frac_layers_gt4 = static_cast<double>(gt4) / static_cast<double>(rep.decisions);
  }
  rep.cell_throughput = sum / (static_cast<double>(drops.size()) * cfg.layout.n_cells());
  return rep;
}

}  // namespace

ThroughputReport run_campaign(const CampaignConfig& cfg, int threads) {
  if (!cfg.seed) throw ConfigError("seed: required (no default seed)");
  std::vector<DropResult> drops(static_cast<std::size_t>(cfg.n_drops));
  const int n = threads > 0 ? threads : omp_get_max_threads();
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(n)
  for (int i = 0; i < cfg.n_drops; ++i) {
    try {
      drops[static_cast<std::size_t>(i)] = simulate_drop(cfg, i);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return merge(cfg, drops);
}

ThroughputReport run_campaign_serial(const CampaignConfig& cfg) {
  if (!cfg.seed) throw ConfigError("seed: required (no default seed)");
  std::vector<DropResult> drops;
  for (int i = 0; i < cfg.n_drops; ++i) drops.push_back(simulate_drop(cfg, i));
  return merge(cfg, drops);
}

ReportSummary summarize(const ThroughputReport& r, const CampaignConfig& cfg, const std::string& label,
                        const std::string& group) {
  ReportSummary s;
  s.label = label;
  s.group = group;
  s.mode = to_string(cfg.mode);
  s.bandwidth = cfg.bandwidth;
  s.carrier = cfg.carrier;
  s.isd = cfg.isd;
  s.n_sites = cfg.layout.n_sites;
  s.sectors_per_site = cfg.layout.sectors_per_site;
  s.ues_per_cell = cfg.ues_per_cell;
  s.mean_throughput = r.mean_throughput;
  s.p5_throughput = r.p5_throughput;
  s.cell_throughput = r.cell_throughput;
  s.mean_layers = r.mean_layers;
  s.frac_layers_gt4 = r.frac_layers_gt4;
  return s;
}

std::vector<CompareRow> compare(const std::vector<ReportSummary>& reports, const std::string& baseline_label) {
  if (reports.empty()) throw ConfigError("compare: no reports");
  auto rel = [](double v, double base) { return base > 0.0 ? 100.0 * v / base : (v > 0.0 ? INFINITY : 100.0); };
  std::vector<CompareRow> rows;
  for (const ReportSummary& r : reports) {
    const ReportSummary* base = nullptr;
    for (const ReportSummary& b : reports)
      if (b.group == r.group && b.label == baseline_label) {
        base = &b;
        break;
      }
    if (!base)
      throw ConfigError("compare: no baseline \"" + baseline_label + "\" in group \"" + r.group + "\"");
    if (r.bandwidth != base->bandwidth || r.carrier != base->carrier || r.isd != base->isd ||
        r.n_sites != base->n_sites || r.sectors_per_site != base->sectors_per_site ||
        r.ues_per_cell != base->ues_per_cell)
      throw ConfigError("compare: report \"" + r.label + "\" does not share bandwidth, carrier and layout with \"" +
                        base->label + "\"");
    CompareRow row;
    row.group = r.group;
    row.variant = r.label;
    row.baseline = base->label;
    row.mean_throughput = r.mean_throughput;
    row.rel_mean_pct = rel(r.mean_throughput, base->mean_throughput);
    row.p5_throughput = r.p5_throughput;
    row.rel_p5_pct = rel(r.p5_throughput, base->p5_throughput);
    row.cell_throughput = r.cell_throughput;
    row.rel_cell_pct = rel(r.cell_throughput, base->cell_throughput);
    row.mean_layers = r.mean_layers;
    row.frac_layers_gt4 = r.frac_layers_gt4;
    rows.push_back(row);
  }
  return rows;
}

double peak_rate_probe(const CampaignConfig& base, double distance, bool los, int rank, int ttis) {
  CampaignConfig cfg = base;
  cfg.layout.n_sites = 1;
  cfg.layout.sectors_per_site = 1;
  cfg.layout.wraparound = false;
  cfg.mode = Mode::su;
  cfg.ues_per_cell = 1;
  cfg.explicit_interferers = 0;
  if (!cfg.seed) cfg.seed = 0;
  cfg.finalize();

  Drop drop;
  UePlacement p;
  p.position = Eigen::Vector2d(distance, 0.0);
  p.orientation = 180.0;  // facing the site
  drop.ues.push_back(p);
  drop.los = {{static_cast<char>(los)}};
  drop.shadowing_db = {{0.0}};
  const CellInfo cell = cell_list(cfg.layout).front();
  const LinkGeometry g = link_geometry(cfg.layout, cell, Eigen::Vector2d::Zero(), p.position, p.orientation);
  drop.coupling_db = {{-pathloss(g.d2d, g.d3d, cfg.carrier, los, cfg.layout) +
                       element_pattern_gain(g.aod, g.zod, cfg.bs_array)}};

  DropEngine engine(cfg, drop, drop_seed(*cfg.seed, 0),
                    rank > 0 ? std::optional<int>(rank) : std::nullopt);
  const DropResult r = engine.run(0, 0, ttis);
  return r.ues.front().throughput_bps;
}

}  // namespace xmimo
