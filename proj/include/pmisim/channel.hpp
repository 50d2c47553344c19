#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pmisim/mat.hpp"
#include "pmisim/rng.hpp"
#include "pmisim/scenario.hpp"
#include "pmisim/topology.hpp"

namespace pmisim {

inline constexpr int kRxAntennas = 2;
inline constexpr int kTxPorts = 8;

struct NoiseModel {
  double thermal_density_dbm_hz = -174.0;
  double noise_figure_db = 9.0;
  double bandwidth_per_prb_hz = 180e3;
};

/// Linear noise power (mW) over `prbs` resource blocks.
inline double noise_power_mw(const NoiseModel& nm, int prbs) {
  if (prbs < 1) throw std::domain_error("noise_power_mw: prbs must be >= 1");
  const double dbm = nm.thermal_density_dbm_hz + nm.noise_figure_db +
                     10.0 * std::log10(prbs * nm.bandwidth_per_prb_hz);
  return std::pow(10.0, dbm / 10.0);
}

/// Small-scale channel matrix of one (UE, cell, subband) link at one TTI.
struct ChannelMatrix {
  CMat entries;  // kRxAntennas x kTxPorts
  int ue = 0;
  int cell = 0;
  int subband = 0;
  long long tti = 0;
};

/// Deterministic LOS ray: rank-1 steering outer product a_rx * a_tx^H with
/// unit-modulus entries, so ||A||_F^2 = N_r * N_t exactly.
inline CMat los_ray(double azimuth_off_boresight_deg, double tx_pol_phase,
                    double rx_pol_phase) {
  const double theta = azimuth_off_boresight_deg * std::numbers::pi / 180.0;
  // Half-wavelength ULA of kTxPorts/2 elements, duplicated per polarization.
  const int elems = kTxPorts / 2;
  std::vector<cplx> a_tx(kTxPorts);
  for (int m = 0; m < elems; ++m) {
    const double ph = std::numbers::pi * m * std::sin(theta);
    a_tx[static_cast<size_t>(m)] = std::polar(1.0, ph);
    a_tx[static_cast<size_t>(m + elems)] = std::polar(1.0, ph + tx_pol_phase);
  }
  const cplx a_rx[kRxAntennas] = {cplx{1.0, 0.0}, std::polar(1.0, rx_pol_phase)};
  CMat a(kRxAntennas, kTxPorts);
  for (int r = 0; r < kRxAntennas; ++r) {
    for (int c = 0; c < kTxPorts; ++c) {
      a(r, c) = a_rx[r] * std::conj(a_tx[static_cast<size_t>(c)]);
    }
  }
  return a;
}

/// i.i.d. CN(0,1) scatter block for (episode, ue, cell, subband) at t = 0.
inline CMat scatter_init(std::uint64_t seed, std::uint64_t episode, int ue, int cell,
                         int subband) {
  KeyedRng rng(seed, stream::kFadingInit, episode, static_cast<std::uint64_t>(ue),
               static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(subband));
  CMat g(kRxAntennas, kTxPorts);
  for (int r = 0; r < kRxAntennas; ++r) {
    for (int c = 0; c < kTxPorts; ++c) g(r, c) = rng.next_cn01();
  }
  return g;
}

/// AR(1) innovation for one step.
inline CMat scatter_innovation(std::uint64_t seed, std::uint64_t episode, int ue, int cell,
                               int subband, long long tti) {
  KeyedRng rng(seed, stream::kFadingStep, episode, static_cast<std::uint64_t>(ue),
               static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(subband),
               static_cast<std::uint64_t>(tti));
  CMat g(kRxAntennas, kTxPorts);
  for (int r = 0; r < kRxAntennas; ++r) {
    for (int c = 0; c < kTxPorts; ++c) g(r, c) = rng.next_cn01();
  }
  return g;
}

inline void ar1_step(CMat& g, const CMat& innovation, double rho) {
  const double w = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) g(r, c) = rho * g(r, c) + w * innovation(r, c);
  }
}

/// One AR(1) step generating the innovation inline; entry order matches
/// scatter_innovation, so this is bit-identical to the two-call form.
inline void ar1_step_keyed(CMat& g, std::uint64_t seed, std::uint64_t episode, int ue, int cell,
                           int subband, long long tti, double rho) {
  KeyedRng rng(seed, stream::kFadingStep, episode, static_cast<std::uint64_t>(ue),
               static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(subband),
               static_cast<std::uint64_t>(tti));
  const double w = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) g(r, c) = rho * g(r, c) + w * rng.next_cn01();
  }
}

/// Scatter block at an arbitrary TTI, recomputed from scratch. The live
/// simulator keeps the recursion incrementally; this closed form exists so
/// tests can check determinism independent of stepping order.
inline CMat scatter_at(std::uint64_t seed, std::uint64_t episode, int ue, int cell, int subband,
                       long long tti, double rho) {
  CMat g = scatter_init(seed, episode, ue, cell, subband);
  for (long long t = 1; t <= tti; ++t) {
    ar1_step(g, scatter_innovation(seed, episode, ue, cell, subband, t), rho);
  }
  return g;
}

/// Static per-link pieces needed to turn a scatter block into H.
struct LinkFadingParams {
  double linear_gain = 0.0;  // pathloss + shadowing + sector gain, linear
  double k_linear = 0.0;     // Ricean K factor; 0 for NLOS links
  CMat los;                  // LOS ray (empty when k_linear == 0)
};

/// H = sqrt(gain) * (sqrt(K/(K+1)) * A + sqrt(1/(K+1)) * G).
inline CMat assemble_channel(const LinkFadingParams& p, const CMat& scatter) {
  CMat h(kRxAntennas, kTxPorts);
  const double amp = std::sqrt(p.linear_gain);
  const double w_los = std::sqrt(p.k_linear / (p.k_linear + 1.0));
  const double w_nlos = std::sqrt(1.0 / (p.k_linear + 1.0));
  for (int r = 0; r < kRxAntennas; ++r) {
    for (int c = 0; c < kTxPorts; ++c) {
      cplx v = w_nlos * scatter(r, c);
      if (p.k_linear > 0.0) v += w_los * p.los(r, c);
      h(r, c) = amp * v;
    }
  }
  return h;
}

/// Builds the static fading parameters of one link from the topology.
inline LinkFadingParams link_fading_params(const Topology& topo, int ue, int cell) {
  LinkFadingParams p;
  p.linear_gain = topo.linear_gain(ue, cell);
  const LinkBudget& lb = topo.link(ue, cell);
  if (lb.los) {
    p.k_linear = std::pow(10.0, topo.radio().ricean_k_db / 10.0);
    KeyedRng rng(topo.scenario().seed, stream::kPolPhase, static_cast<std::uint64_t>(ue),
                 static_cast<std::uint64_t>(cell));
    const double tx_ph = rng.next_range(0.0, 2.0 * std::numbers::pi);
    const double rx_ph = rng.next_range(0.0, 2.0 * std::numbers::pi);
    p.los = los_ray(lb.azimuth_off_boresight_deg, tx_ph, rx_ph);
  }
  return p;
}

/// Full channel draw for one link at one TTI (pure; for tests and tools).
inline ChannelMatrix draw_channel(const Topology& topo, std::uint64_t episode, int ue, int cell,
                                  int subband, long long tti) {
  const LinkFadingParams p = link_fading_params(topo, ue, cell);
  ChannelMatrix cm;
  cm.entries = assemble_channel(
      p, scatter_at(topo.scenario().seed, episode, ue, cell, subband, tti, topo.radio().ar1_rho));
  cm.ue = ue;
  cm.cell = cell;
  cm.subband = subband;
  cm.tti = tti;
  return cm;
}

}  // namespace pmisim
