#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pmisim/bus.hpp"
#include "pmisim/channel.hpp"
#include "pmisim/codebook.hpp"
#include "pmisim/csi.hpp"
#include "pmisim/phy.hpp"
#include "pmisim/rng.hpp"
#include "pmisim/scenario.hpp"
#include "pmisim/topology.hpp"

namespace pmisim {

/// Wideband rank plus per-subband PMI committed for one UE.
struct Commitment {
  int ri = 1;
  std::vector<int> pmi;
};

struct UeRealized {
  int ue = 0;
  int wb_cqi = 0;
  double se = 0.0;        // cqi_to_se(wb_cqi)
  double thr_mbps = 0.0;
  double sinr = 0.0;
  double snr = 0.0;
  int prbs = 0;
  std::vector<double> iota_mw;  // per tracked neighbor, band-averaged per PRB
  double i_uk_mw = 0.0;         // exact sum of iota_mw
  std::vector<int> cqi_sb;
};

struct CellStep {
  int pci = 0;
  double mean_se = 0.0;
  double mean_thr_mbps = 0.0;
  double prb_util = 0.0;
  double interference_mw = 0.0;  // I_k, exact sum over attached UEs
  bool truncated = false;
  std::vector<UeRealized> ues;
};

struct StepMetrics {
  long long tti = 0;
  std::vector<CellStep> cells;
};

struct SimOptions {
  TrafficMode traffic = TrafficMode::kFixedRate;
  double demand_mbps = 1.0;
  bool hash_channels = true;
};

/// Multi-cell downlink simulator.
///
/// Timeline per TTI: commitments are refreshed (directives override,
/// everyone else follows their latest reported PMI), PRBs are scheduled
/// from last reported CQI, the transmission is realized against every
/// cell's committed precoders, and fresh reports are produced for the
/// next decision round. A directive handed to step() therefore takes
/// effect on the TTI that step() realizes.
class DownlinkSim {
 public:
  DownlinkSim(const Scenario& sc, const RadioModel& rm, const CodebookConfig& cbc,
              const SimOptions& opts)
      : topo_(sc, rm), cb_(cbc), opts_(opts) {
    const Scenario& s = topo_.scenario();
    sigma2_prb_ = noise_power_mw(
        NoiseModel{-174.0, s.noise_figure_db, topo_.radio().prb_bandwidth_hz}, 1);
    power_per_prb_mw_ = std::pow(10.0, s.bs_power_dbm / 10.0) / s.num_prbs;
    const int n_ues = topo_.num_ues();
    slots_.resize(static_cast<size_t>(n_ues));
    fading_.resize(static_cast<size_t>(n_ues));
    scatter_.resize(static_cast<size_t>(n_ues));
    h_.resize(static_cast<size_t>(n_ues));
    for (int u = 0; u < n_ues; ++u) {
      auto& sl = slots_[static_cast<size_t>(u)];
      sl.push_back(topo_.serving_cell(u));
      for (int c : topo_.tracked_neighbors(u)) sl.push_back(c);
      auto& fp = fading_[static_cast<size_t>(u)];
      for (int c : sl) fp.push_back(link_fading_params(topo_, u, c));
      scatter_[static_cast<size_t>(u)].assign(sl.size(), {});
      h_[static_cast<size_t>(u)].assign(sl.size(), {});
      for (size_t i = 0; i < sl.size(); ++i) {
        scatter_[static_cast<size_t>(u)][i].assign(static_cast<size_t>(s.num_subbands),
                                                   CMat(kRxAntennas, kTxPorts));
        h_[static_cast<size_t>(u)][i].assign(static_cast<size_t>(s.num_subbands),
                                             CMat(kRxAntennas, kTxPorts));
      }
    }
    commitments_.resize(static_cast<size_t>(n_ues));
    last_wb_cqi_.assign(static_cast<size_t>(n_ues), 0);
    reports_.resize(static_cast<size_t>(n_ues));
  }

  const Topology& topology() const { return topo_; }
  const Codebook& codebook() const { return cb_; }
  double sigma2_prb_mw() const { return sigma2_prb_; }
  double power_per_prb_mw() const { return power_per_prb_mw_; }
  long long tti() const { return tti_; }
  std::uint64_t episode() const { return episode_; }
  std::uint64_t channel_hash() const { return hash_.digest(); }
  int rejected_assignments() const { return rejected_assignments_; }

  const std::vector<CsiReport>& reports() const { return reports_; }
  const Commitment& commitment(int ue) const { return commitments_[static_cast<size_t>(ue)]; }

  /// Channel of (ue, tracked slot, subband) at the current TTI; slot 0 is
  /// the serving cell.
  const CMat& channel(int ue, int slot, int subband) const {
    return h_[static_cast<size_t>(ue)][static_cast<size_t>(slot)][static_cast<size_t>(subband)];
  }

  /// Starts an episode: fresh fading, follow-PMI bootstrap commitments,
  /// and the TTI-0 transmission whose reports seed the first decision.
  StepMetrics reset_episode(std::uint64_t episode) {
    episode_ = episode;
    tti_ = 0;
    const Scenario& s = topo_.scenario();
    for (int u = 0; u < topo_.num_ues(); ++u) {
      auto& sl = slots_[static_cast<size_t>(u)];
      for (size_t i = 0; i < sl.size(); ++i) {
        for (int sb = 0; sb < s.num_subbands; ++sb) {
          scatter_[static_cast<size_t>(u)][i][static_cast<size_t>(sb)] =
              scatter_init(s.seed, episode_, u, sl[i], sb);
        }
      }
    }
    assemble_all();
    // Bootstrap: every UE starts on its own preferred wideband selection.
    for (int u = 0; u < topo_.num_ues(); ++u) {
      const PmiSelection sel = select_for(u);
      commitments_[static_cast<size_t>(u)] = {sel.ri, sel.pmi};
      double snr_sum = 0.0;
      for (int sb = 0; sb < s.num_subbands; ++sb) {
        snr_sum += power_per_prb_mw_ *
                   coupling(u, 0, sb, commitments_[static_cast<size_t>(u)]) /
                   commitments_[static_cast<size_t>(u)].ri / sigma2_prb_;
      }
      last_wb_cqi_[static_cast<size_t>(u)] = sinr_to_cqi(snr_sum / s.num_subbands);
    }
    return realize_tti();
  }

  /// Advances one TTI applying the given directives.
  StepMetrics step(std::span<const ControlDirective> directives) {
    ++tti_;
    const Scenario& s = topo_.scenario();
    for (int u = 0; u < topo_.num_ues(); ++u) {
      auto& sl = slots_[static_cast<size_t>(u)];
      for (size_t i = 0; i < sl.size(); ++i) {
        for (int sb = 0; sb < s.num_subbands; ++sb) {
          ar1_step(scatter_[static_cast<size_t>(u)][i][static_cast<size_t>(sb)],
                   scatter_innovation(s.seed, episode_, u, sl[i], sb, tti_),
                   topo_.radio().ar1_rho);
        }
      }
    }
    assemble_all();

    // Follow-PMI default: refresh from the latest (one-TTI-old) report.
    for (int u = 0; u < topo_.num_ues(); ++u) {
      const CsiReport& r = reports_[static_cast<size_t>(u)];
      if (r.tti == tti_ - 1 && !r.pmi.empty()) {
        commitments_[static_cast<size_t>(u)] = {r.ri, r.pmi};
      }
      // Stale report: previous assignment is retained as-is.
    }
    apply_directives(directives);
    return realize_tti();
  }

 private:
  PmiSelection select_for(int ue) const {
    return ue_select_pmi(h_[static_cast<size_t>(ue)][0], cb_, sigma2_prb_);
  }

  double coupling(int ue, int slot, int subband, const Commitment& cm) const {
    return product_frob_sq(channel(ue, slot, subband),
                           cb_.get_pm(cm.ri, cm.pmi[static_cast<size_t>(subband)]));
  }

  void assemble_all() {
    const Scenario& s = topo_.scenario();
    for (int u = 0; u < topo_.num_ues(); ++u) {
      const auto& sl = slots_[static_cast<size_t>(u)];
      for (size_t i = 0; i < sl.size(); ++i) {
        for (int sb = 0; sb < s.num_subbands; ++sb) {
          CMat& h = h_[static_cast<size_t>(u)][i][static_cast<size_t>(sb)];
          h = assemble_channel(fading_[static_cast<size_t>(u)][i],
                               scatter_[static_cast<size_t>(u)][i][static_cast<size_t>(sb)]);
          if (opts_.hash_channels) {
            for (const cplx& z : h.data()) hash_.add(z);
          }
        }
      }
    }
  }

  void apply_directives(std::span<const ControlDirective> directives) {
    const Scenario& s = topo_.scenario();
    for (const ControlDirective& d : directives) {
      for (const PmiAssignment& a : d.assignments) {
        if (a.ue < 0 || a.ue >= topo_.num_ues() || topo_.serving_cell(a.ue) != d.pci ||
            (a.ri != 1 && a.ri != 2) || a.pmi < 0 || a.pmi >= cb_.size(a.ri)) {
          ++rejected_assignments_;
          continue;
        }
        bool bad_subband = false;
        for (int sb : a.subbands) {
          if (sb < 0 || sb >= s.num_subbands) bad_subband = true;
        }
        if (bad_subband) {
          ++rejected_assignments_;
          continue;
        }
        Commitment& cm = commitments_[static_cast<size_t>(a.ue)];
        if (a.subbands.empty() || a.ri != cm.ri) {
          // Wideband override (a rank change always applies wideband).
          cm.ri = a.ri;
          cm.pmi.assign(static_cast<size_t>(s.num_subbands), a.pmi);
        } else {
          for (int sb : a.subbands) cm.pmi[static_cast<size_t>(sb)] = a.pmi;
        }
      }
    }
  }

  /// Realizes the current TTI: scheduling, SINR/CQI/throughput for every
  /// UE, interference records, and the next round of reports.
  StepMetrics realize_tti() {
    const Scenario& s = topo_.scenario();
    const int n_cells = static_cast<int>(topo_.cells().size());
    StepMetrics out;
    out.tti = tti_;
    out.cells.resize(static_cast<size_t>(n_cells));

    // Per-cell scheduling from last reported CQI.
    std::vector<PrbAllocation> alloc(static_cast<size_t>(n_cells));
    // Committed transmission per (cell, subband): owner UE or -1 if silent.
    std::vector<std::vector<int>> sb_owner(static_cast<size_t>(n_cells));
    for (int c = 0; c < n_cells; ++c) {
      const std::vector<int>& ues = topo_.attached_ues(c);
      std::vector<double> demand(ues.size(), opts_.demand_mbps * 1000.0);
      std::vector<double> se(ues.size());
      for (size_t i = 0; i < ues.size(); ++i) {
        se[i] = cqi_to_se(last_wb_cqi_[static_cast<size_t>(ues[i])]);
      }
      alloc[static_cast<size_t>(c)] =
          schedule_prbs(opts_.traffic, s.num_prbs, static_cast<int>(ues.size()), demand, se,
                        topo_.radio().prb_bandwidth_hz);
      // PRBs are laid out contiguously in UE order; a subband's committed
      // precoder is its first PRB's owner.
      sb_owner[static_cast<size_t>(c)].assign(static_cast<size_t>(s.num_subbands), -1);
      std::vector<int> prb_owner(static_cast<size_t>(s.num_prbs), -1);
      int cursor = 0;
      for (size_t i = 0; i < ues.size(); ++i) {
        for (int k = 0; k < alloc[static_cast<size_t>(c)].per_ue[i]; ++k) {
          prb_owner[static_cast<size_t>(cursor++)] = ues[i];
        }
      }
      for (int sb = 0; sb < s.num_subbands; ++sb) {
        const int first = s.subband_first_prb(sb);
        sb_owner[static_cast<size_t>(c)][static_cast<size_t>(sb)] =
            prb_owner[static_cast<size_t>(first)];
      }
    }

    // Realize every UE against the committed network state.
    for (int c = 0; c < n_cells; ++c) {
      CellStep& cell = out.cells[static_cast<size_t>(c)];
      cell.pci = c;
      cell.prb_util = alloc[static_cast<size_t>(c)].utilization;
      cell.truncated = alloc[static_cast<size_t>(c)].truncated;
      const std::vector<int>& ues = topo_.attached_ues(c);
      for (size_t i = 0; i < ues.size(); ++i) {
        const int u = ues[i];
        UeRealized r = realize_ue(u, sb_owner);
        r.prbs = alloc[static_cast<size_t>(c)].per_ue[i];
        r.thr_mbps = throughput_mbps(r.prbs, r.se, topo_.radio().prb_bandwidth_hz);
        cell.mean_se += r.se;
        cell.mean_thr_mbps += r.thr_mbps;
        cell.interference_mw += r.i_uk_mw;
        cell.ues.push_back(std::move(r));
      }
      if (!ues.empty()) {
        cell.mean_se /= static_cast<double>(ues.size());
        cell.mean_thr_mbps /= static_cast<double>(ues.size());
      }
    }

    // Fresh reports for the next decision round.
    for (int c = 0; c < n_cells; ++c) {
      const CellStep& cell = out.cells[static_cast<size_t>(c)];
      for (const UeRealized& r : cell.ues) {
        const PmiSelection sel = select_for(r.ue);
        reports_[static_cast<size_t>(r.ue)] = build_report(
            r.ue, c, tti_, sel, r.cqi_sb, r.wb_cqi, topo_.link(r.ue, c).rsrp_dbm, r.thr_mbps,
            r.iota_mw, s.num_subbands);
        last_wb_cqi_[static_cast<size_t>(r.ue)] = r.wb_cqi;
      }
    }
    return out;
  }

  UeRealized realize_ue(int u, const std::vector<std::vector<int>>& sb_owner) const {
    const Scenario& s = topo_.scenario();
    const auto& sl = slots_[static_cast<size_t>(u)];
    const Commitment& own = commitments_[static_cast<size_t>(u)];
    UeRealized r;
    r.ue = u;
    r.iota_mw.assign(sl.size() - 1, 0.0);
    double sig_sum = 0.0;
    double intn_sum = 0.0;
    double noise_sum = 0.0;
    for (int sb = 0; sb < s.num_subbands; ++sb) {
      std::vector<InterferenceTerm> terms(sl.size() - 1);
      for (size_t n = 1; n < sl.size(); ++n) {
        const int nc = sl[n];
        const int owner = sb_owner[static_cast<size_t>(nc)][static_cast<size_t>(sb)];
        InterferenceTerm& t = terms[n - 1];
        if (owner >= 0) {
          const Commitment& cm = commitments_[static_cast<size_t>(owner)];
          t.active = true;
          t.rank = cm.ri;
          t.coupling = coupling(u, static_cast<int>(n), sb, cm);
        }
      }
      std::vector<double> per_neighbor;
      const SubbandLink link = sinr_post_selection(coupling(u, 0, sb, own), own.ri, terms,
                                                   power_per_prb_mw_, sigma2_prb_, &per_neighbor);
      for (size_t n = 0; n + 1 < sl.size(); ++n) {
        r.iota_mw[n] += per_neighbor[n] / s.num_subbands;
      }
      sig_sum += link.signal_mw;
      intn_sum += link.interference_mw;
      noise_sum += sigma2_prb_;
      r.cqi_sb.push_back(sinr_to_cqi(link.sinr));
    }
    r.sinr = sig_sum / (intn_sum + noise_sum);
    r.snr = sig_sum / noise_sum;
    r.wb_cqi = sinr_to_cqi(r.sinr);
    r.se = cqi_to_se(r.wb_cqi);
    r.i_uk_mw = 0.0;
    for (double v : r.iota_mw) r.i_uk_mw += v;
    return r;
  }

  Topology topo_;
  Codebook cb_;
  SimOptions opts_;
  double sigma2_prb_ = 1.0;
  double power_per_prb_mw_ = 1.0;
  std::uint64_t episode_ = 0;
  long long tti_ = 0;
  std::vector<std::vector<int>> slots_;  // per UE: serving + tracked neighbors
  std::vector<std::vector<LinkFadingParams>> fading_;
  std::vector<std::vector<std::vector<CMat>>> scatter_;  // [ue][slot][subband]
  std::vector<std::vector<std::vector<CMat>>> h_;
  std::vector<Commitment> commitments_;
  std::vector<int> last_wb_cqi_;
  std::vector<CsiReport> reports_;
  Fnv1a hash_;
  int rejected_assignments_ = 0;
};

}  // namespace pmisim
