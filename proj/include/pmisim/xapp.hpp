#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmisim/bus.hpp"
#include "pmisim/codebook.hpp"
#include "pmisim/cqi_table.hpp"
#include "pmisim/csi.hpp"
#include "pmisim/rl.hpp"

namespace pmisim {

enum class GroupKind { kEdge = 0, kHighInterference = 1, kAll = 2 };

inline const char* group_name(GroupKind g) {
  switch (g) {
    case GroupKind::kEdge:
      return "edge";
    case GroupKind::kHighInterference:
      return "high_interference";
    default:
      return "all";
  }
}

struct PrioritizationGroup {
  GroupKind kind = GroupKind::kAll;
  std::vector<int> ues;
};

/// What the controller knows about one cell after draining reports.
struct UeObservation {
  int ue = 0;
  int wb_cqi = 0;
  double thr_mbps = 0.0;
  double rsrp_dbm = 0.0;
  double interference_mw = 0.0;  // i_{u,k}
  int ri = 1;
  std::vector<int> pmi;
};

struct CellObservation {
  int pci = 0;
  long long tti = 0;
  std::vector<UeObservation> ues;

  double total_interference_mw() const {
    double s = 0.0;
    for (const UeObservation& u : ues) s += u.interference_mw;
    return s;
  }
};

/// Builds per-cell observations from a batch of CSI messages; i_{u,k} is
/// the exact sum of the reported per-neighbor entries.
inline std::vector<CellObservation> group_reports_by_cell(std::span<const CsiReport> reports,
                                                          int num_cells) {
  std::vector<CellObservation> cells(static_cast<size_t>(num_cells));
  for (int c = 0; c < num_cells; ++c) cells[static_cast<size_t>(c)].pci = c;
  for (const CsiReport& r : reports) {
    CellObservation& cell = cells.at(static_cast<size_t>(r.pci));
    cell.tti = r.tti;
    UeObservation u;
    u.ue = r.ue;
    u.wb_cqi = r.wb_cqi;
    u.thr_mbps = r.thr_mbps;
    u.rsrp_dbm = r.rsrp_dbm;
    double acc = 0.0;
    for (double v : r.interf_mw) acc += v;
    u.interference_mw = acc;
    u.ri = r.ri;
    u.pmi = r.pmi;
    cell.ues.push_back(std::move(u));
  }
  for (CellObservation& cell : cells) {
    std::sort(cell.ues.begin(), cell.ues.end(),
              [](const UeObservation& a, const UeObservation& b) { return a.ue < b.ue; });
  }
  return cells;
}

/// argmax_k I_k, ties to the lowest PCI.
inline int select_target_cell(std::span<const double> interference_per_cell) {
  if (interference_per_cell.empty()) {
    throw std::invalid_argument("select_target_cell: no cells");
  }
  int best = 0;
  for (size_t k = 1; k < interference_per_cell.size(); ++k) {
    if (interference_per_cell[k] > interference_per_cell[static_cast<size_t>(best)]) {
      best = static_cast<int>(k);
    }
  }
  return best;
}

struct GroupRules {
  double edge_rsrp_dbm = -100.0;
  double beta_fraction = 0.2;
};

struct Groups {
  PrioritizationGroup edge;
  PrioritizationGroup high_interference;
  PrioritizationGroup all;

  const PrioritizationGroup& of(GroupKind k) const {
    switch (k) {
      case GroupKind::kEdge:
        return edge;
      case GroupKind::kHighInterference:
        return high_interference;
      default:
        return all;
    }
  }
};

/// Edge = RSRP below threshold; high-interference = top ceil(frac*N) UEs by
/// i_{u,k} descending (ties to the lower UE id); all = every attached UE.
inline Groups identify_groups(const CellObservation& cell, const GroupRules& rules = {}) {
  Groups g;
  g.edge.kind = GroupKind::kEdge;
  g.high_interference.kind = GroupKind::kHighInterference;
  g.all.kind = GroupKind::kAll;
  for (const UeObservation& u : cell.ues) {
    g.all.ues.push_back(u.ue);
    if (u.rsrp_dbm < rules.edge_rsrp_dbm) g.edge.ues.push_back(u.ue);
  }
  std::vector<const UeObservation*> sorted;
  sorted.reserve(cell.ues.size());
  for (const UeObservation& u : cell.ues) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(), [](const UeObservation* a, const UeObservation* b) {
    if (a->interference_mw != b->interference_mw) {
      return a->interference_mw > b->interference_mw;
    }
    return a->ue < b->ue;
  });
  const int m = std::max<int>(
      1, static_cast<int>(std::ceil(rules.beta_fraction * static_cast<double>(cell.ues.size()))));
  for (int i = 0; i < m && i < static_cast<int>(sorted.size()); ++i) {
    g.high_interference.ues.push_back(sorted[static_cast<size_t>(i)]->ue);
  }
  return g;
}

/// Normalization constants for the state vector and interference cost.
struct StateNorms {
  int num_prbs = 52;
  double sigma2_mw = 1.0;        // per-PRB noise power, the log reference
  double decades = 6.0;          // log-compression span
  double thr_cap_mbps = 50.0;
  double ue_cap = 50.0;
  double prb_bandwidth_hz = 180e3;
};

inline double log_compress(double value_mw, double ref_mw, double decades) {
  if (value_mw <= 0.0) return 0.0;
  const double d = std::log10(value_mw / ref_mw) / decades;
  return std::clamp(d, 0.0, 1.0);
}

/// Six normalized features in [0,1]; `degenerate_group` flags the case
/// where the prioritized group covers every UE.
struct MdpState {
  std::array<double, 6> v{};
  bool degenerate_group = false;

  double mean_cqi_others() const { return v[0]; }
  double cqi_max() const { return v[1]; }
  double interference() const { return v[2]; }
  double mean_prb_usage() const { return v[3]; }
  double avg_throughput() const { return v[4]; }
  double total_ues() const { return v[5]; }
};

/// PRB count recovered from the reported throughput; exact inverse of the
/// throughput formula when se > 0.
inline double prbs_from_throughput(double thr_mbps, int wb_cqi, double prb_bandwidth_hz) {
  const double se = cqi_to_se(wb_cqi);
  if (se <= 0.0 || thr_mbps <= 0.0) return 0.0;
  return thr_mbps * 1e6 / (prb_bandwidth_hz * se);
}

inline MdpState build_state(const CellObservation& cell, const PrioritizationGroup& prioritized,
                            const StateNorms& norms) {
  if (cell.ues.empty()) throw std::logic_error("build_state: cell has no attached UEs");
  MdpState st;
  double cqi_sum_others = 0.0;
  int n_others = 0;
  double cqi_sum_all = 0.0;
  int cqi_max = 0;
  double prb_sum = 0.0;
  double thr_sum = 0.0;
  for (const UeObservation& u : cell.ues) {
    const bool in_group = std::find(prioritized.ues.begin(), prioritized.ues.end(), u.ue) !=
                          prioritized.ues.end();
    if (!in_group) {
      cqi_sum_others += u.wb_cqi;
      ++n_others;
    }
    cqi_sum_all += u.wb_cqi;
    cqi_max = std::max(cqi_max, u.wb_cqi);
    prb_sum += prbs_from_throughput(u.thr_mbps, u.wb_cqi, norms.prb_bandwidth_hz);
    thr_sum += u.thr_mbps;
  }
  const double n = static_cast<double>(cell.ues.size());
  if (n_others == 0) {
    st.degenerate_group = true;
    st.v[0] = (cqi_sum_all / n) / 15.0;
  } else {
    st.v[0] = (cqi_sum_others / n_others) / 15.0;
  }
  st.v[1] = cqi_max / 15.0;
  st.v[2] = log_compress(cell.total_interference_mw(), norms.sigma2_mw, norms.decades);
  st.v[3] = std::clamp((prb_sum / n) / norms.num_prbs, 0.0, 1.0);
  st.v[4] = std::clamp((thr_sum / n) / norms.thr_cap_mbps, 0.0, 1.0);
  st.v[5] = std::clamp(n / norms.ue_cap, 0.0, 1.0);
  return st;
}

/// Decoded (group, PMI-per-rank) choice with resolved per-UE assignments.
struct AgentAction {
  GroupKind group = GroupKind::kAll;
  int pmi_r1 = 0;
  int pmi_r2 = 0;
  std::vector<PmiAssignment> resolved;
  bool rejected = false;
};

/// Maps raw head outputs onto an action: group members get the rank-1
/// index if they reported RI 1 and the rank-2 index otherwise, applied
/// wideband. Out-of-range indices reject the action.
inline AgentAction decode_action(int group_idx, int pmi_r1, int pmi_r2, const Groups& groups,
                                 const CellObservation& cell, const Codebook& cb) {
  AgentAction act;
  if (group_idx < 0 || group_idx > 2 || pmi_r1 < 0 || pmi_r1 >= cb.rank1_size() || pmi_r2 < 0 ||
      pmi_r2 >= cb.rank2_size()) {
    act.rejected = true;
    return act;
  }
  act.group = static_cast<GroupKind>(group_idx);
  act.pmi_r1 = pmi_r1;
  act.pmi_r2 = pmi_r2;
  const PrioritizationGroup& g = groups.of(act.group);
  for (int ue : g.ues) {
    const auto it = std::find_if(cell.ues.begin(), cell.ues.end(),
                                 [ue](const UeObservation& u) { return u.ue == ue; });
    if (it == cell.ues.end()) continue;
    PmiAssignment a;
    a.ue = ue;
    a.ri = it->ri;
    a.pmi = (it->ri == 1) ? pmi_r1 : pmi_r2;
    act.resolved.push_back(std::move(a));
  }
  return act;
}

/// Reward constants; defaults follow the experiment configuration.
struct RewardConstants {
  double gamma_target = 2.5;
  double alpha = 0.7;
  double wp = 0.85;  // target PRB utilization
};

struct RewardBreakdown {
  double gamma_se = 0.0;      // mean achieved SE of the selected UEs
  double gamma_target = 2.5;
  double alpha = 0.7;
  double interf_cost = 0.0;   // normalized mean interference of selection
  double prb_util = 0.0;
  double wp = 0.85;
  double reward = 0.0;
  bool degenerate_selection = false;

  double recompute() const {
    return (gamma_se - gamma_target) - alpha * interf_cost - std::abs(prb_util - wp);
  }
};

/// Realized per-UE inputs for the reward; SE comes from the CQI table.
struct RealizedUe {
  int ue = 0;
  int wb_cqi = 0;
  double interference_mw = 0.0;
};

/// r = (gamma - gamma_target) - alpha * cost - |util - wp|; an empty
/// selection falls back to the whole cell and sets the degenerate flag.
inline RewardBreakdown compute_reward(std::span<const RealizedUe> selected,
                                      std::span<const RealizedUe> whole_cell, double prb_util,
                                      const RewardConstants& rc, const StateNorms& norms) {
  RewardBreakdown rb;
  rb.gamma_target = rc.gamma_target;
  rb.alpha = rc.alpha;
  rb.wp = rc.wp;
  rb.prb_util = prb_util;
  std::span<const RealizedUe> basis = selected;
  if (basis.empty()) {
    basis = whole_cell;
    rb.degenerate_selection = true;
  }
  if (basis.empty()) throw std::logic_error("compute_reward: no UEs to evaluate");
  double se_sum = 0.0;
  double cost_sum = 0.0;
  for (const RealizedUe& u : basis) {
    se_sum += cqi_to_se(u.wb_cqi);
    cost_sum += log_compress(u.interference_mw, norms.sigma2_mw, norms.decades);
  }
  rb.gamma_se = se_sum / static_cast<double>(basis.size());
  rb.interf_cost = cost_sum / static_cast<double>(basis.size());
  rb.reward = rb.recompute();
  return rb;
}

/// Baseline policy: mirror every UE's reported per-subband PMIs back as a
/// directive for its serving cell.
inline std::vector<ControlDirective> follow_pmi_directives(std::span<const CsiReport> reports,
                                                           long long directive_tti) {
  std::vector<ControlDirective> out;
  for (const CsiReport& r : reports) {
    ControlDirective* d = nullptr;
    for (ControlDirective& existing : out) {
      if (existing.pci == r.pci) {
        d = &existing;
        break;
      }
    }
    if (!d) {
      out.push_back(ControlDirective{r.pci, directive_tti, "follow_pmi", {}});
      d = &out.back();
    }
    for (size_t sb = 0; sb < r.pmi.size(); ++sb) {
      PmiAssignment a;
      a.ue = r.ue;
      a.ri = r.ri;
      a.pmi = r.pmi[sb];
      a.subbands = {static_cast<int>(sb)};
      d->assignments.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace pmisim
