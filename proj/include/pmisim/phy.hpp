#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "pmisim/cqi_table.hpp"
#include "pmisim/mat.hpp"

namespace pmisim {

/// ||H W||_F^2 / sigma^2.
inline double snr_eq2(const CMat& h, const CMat& w, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::domain_error("snr_eq2: sigma2 must be > 0");
  return product_frob_sq(h, w) / sigma2;
}

/// rank * log2(1 + snr).
inline double se_eq2(int rank, double snr) {
  if (snr < 0.0) throw std::domain_error("se_eq2: snr must be >= 0");
  return rank * std::log2(1.0 + snr);
}

/// Candidate spectral efficiency of a precoder: sum over streams of
/// log2(1 + SINR_i) with per-stream MMSE SINRs of the effective channel
/// G = H W. For rank 1 this reduces exactly to log2(1 + ||HW||^2/sigma2);
/// for rank 2 the second stream's contribution collapses when the channel
/// is rank deficient instead of double-counting the prelog.
inline double candidate_se(const CMat& h, const CMat& w, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::domain_error("candidate_se: sigma2 must be > 0");
  const int rank = w.cols();
  if (rank == 1) {
    return std::log2(1.0 + product_frob_sq(h, w) / sigma2);
  }
  if (rank != 2) throw std::invalid_argument("candidate_se: rank must be 1 or 2");
  // Effective 2-stream channel columns.
  cplx g[2][2];
  for (int r = 0; r < h.rows(); ++r) {
    for (int c = 0; c < 2; ++c) {
      cplx acc{0.0, 0.0};
      for (int k = 0; k < h.cols(); ++k) acc += h(r, k) * w(k, c);
      g[r][c] = acc;
    }
  }
  const double n1 = std::norm(g[0][0]) + std::norm(g[1][0]);
  const double n2 = std::norm(g[0][1]) + std::norm(g[1][1]);
  const cplx cross = std::conj(g[0][0]) * g[0][1] + std::conj(g[1][0]) * g[1][1];
  const double a = n1 + sigma2;
  const double c = n2 + sigma2;
  const double det = a * c - std::norm(cross);
  // 1 + SINR_i = det / (sigma2 * opposite diagonal of G^H G + sigma2 I).
  return std::log2(det / (sigma2 * c)) + std::log2(det / (sigma2 * a));
}

/// Realized quantities of one link at one TTI.
struct LinkMetrics {
  double snr = 0.0;   // noise-only, linear
  double sinr = 0.0;  // with interference, linear
  double se = 0.0;    // from the CQI table, bit/s/Hz
  int cqi = 0;
  int rank_used = 1;
  int pmi_used = 0;
};

/// Interference bookkeeping of one UE: one entry per tracked neighbor,
/// plus the exact sums the per-cell aggregation builds on.
struct InterferenceRecord {
  std::vector<double> per_neighbor_mw;  // iota_eta, tracked-neighbor order
  double total_mw = 0.0;                // i_{u,k} = sum of the above

  void finalize() {
    total_mw = 0.0;
    for (double v : per_neighbor_mw) total_mw += v;
  }
};

/// One interfering cell's contribution hypothesis on a subband.
struct InterferenceTerm {
  double coupling = 0.0;  // ||H W||_F^2 for the neighbor's committed precoder
  int rank = 1;
  bool active = false;    // neighbor transmits on this subband
};

/// Per-PRB SINR given serving coupling and neighbor terms; power_per_prb_mw
/// scales both signal and interference identically.
struct SubbandLink {
  double signal_mw = 0.0;
  double interference_mw = 0.0;
  double sinr = 0.0;
  double snr = 0.0;
};

inline SubbandLink sinr_post_selection(double serving_coupling, int serving_rank,
                                       std::span<const InterferenceTerm> neighbors,
                                       double power_per_prb_mw, double sigma2_mw,
                                       std::vector<double>* per_neighbor_mw = nullptr) {
  if (!(sigma2_mw > 0.0)) throw std::domain_error("sinr_post_selection: sigma2 must be > 0");
  if (serving_rank < 1) throw std::logic_error("sinr_post_selection: missing committed precoder");
  SubbandLink out;
  out.signal_mw = power_per_prb_mw * serving_coupling / serving_rank;
  for (const InterferenceTerm& t : neighbors) {
    const double iota = t.active ? power_per_prb_mw * t.coupling / t.rank : 0.0;
    if (per_neighbor_mw) per_neighbor_mw->push_back(iota);
    out.interference_mw += iota;
  }
  out.sinr = out.signal_mw / (out.interference_mw + sigma2_mw);
  out.snr = out.signal_mw / sigma2_mw;
  return out;
}

enum class TrafficMode { kFullBuffer, kFixedRate };

struct PrbAllocation {
  std::vector<int> per_ue;  // aligned with the cell's attached-UE list
  int total_used = 0;
  double utilization = 0.0;
  bool truncated = false;
};

/// Round-robin PRB scheduler over the cell's UEs in id order.
///
/// Full buffer splits the whole pool as evenly as possible. Fixed rate
/// grants each UE ceil(demand_bits / (prb_bw * tti * se)) blocks based on
/// its last reported efficiency, truncating when the pool runs out.
inline PrbAllocation schedule_prbs(TrafficMode mode, int num_prbs, int num_ues,
                                   std::span<const double> demand_bits_per_tti,
                                   std::span<const double> se_per_ue,
                                   double prb_bandwidth_hz = 180e3, double tti_s = 1e-3) {
  PrbAllocation alloc;
  alloc.per_ue.assign(static_cast<size_t>(num_ues), 0);
  if (num_ues == 0) return alloc;
  if (mode == TrafficMode::kFullBuffer) {
    const int base = num_prbs / num_ues;
    const int extra = num_prbs % num_ues;
    for (int u = 0; u < num_ues; ++u) {
      alloc.per_ue[static_cast<size_t>(u)] = base + (u < extra ? 1 : 0);
    }
    alloc.total_used = num_prbs;
  } else {
    int remaining = num_prbs;
    for (int u = 0; u < num_ues; ++u) {
      const double se = se_per_ue[static_cast<size_t>(u)];
      const double demand = demand_bits_per_tti[static_cast<size_t>(u)];
      if (se <= 0.0 || demand <= 0.0) continue;
      const int need = static_cast<int>(std::ceil(demand / (prb_bandwidth_hz * tti_s * se)));
      const int granted = std::min(need, remaining);
      if (granted < need) alloc.truncated = true;
      alloc.per_ue[static_cast<size_t>(u)] = granted;
      remaining -= granted;
    }
    alloc.total_used = num_prbs - remaining;
  }
  alloc.utilization = num_prbs > 0 ? static_cast<double>(alloc.total_used) / num_prbs : 0.0;
  return alloc;
}

/// prbs * 180 kHz * se, in Mbit/s at full duty.
inline double throughput_mbps(int prbs, double se, double prb_bandwidth_hz = 180e3) {
  return prbs * prb_bandwidth_hz * se / 1e6;
}

}  // namespace pmisim
