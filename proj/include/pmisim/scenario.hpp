#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pmisim {

/// Raised for invalid user-supplied configuration; the CLI maps it to
/// exit code 2.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deployment-level parameters of one experiment.
struct Scenario {
  int num_sites = 7;
  int sectors_per_site = 3;
  double isd_m = 500.0;
  double carrier_ghz = 3.7;
  double bandwidth_mhz = 10.0;
  int num_prbs = 52;
  int num_subbands = 6;
  int ues_per_cell = 10;
  double bs_power_dbm = 43.0;
  double bs_height_m = 25.0;
  double ue_height_m = 1.5;
  double noise_figure_db = 9.0;
  std::uint64_t seed = 1;

  int num_cells() const { return num_sites * sectors_per_site; }
  int num_ues() const { return num_cells() * ues_per_cell; }

  void validate() const {
    if (num_sites != 1 && num_sites != 7 && num_sites != 19) {
      throw config_error("scenario: num_sites must be one of {1, 7, 19}");
    }
    if (sectors_per_site < 1) throw config_error("scenario: sectors_per_site must be >= 1");
    if (!(isd_m > 0.0)) throw config_error("scenario: isd_m must be > 0");
    if (!(carrier_ghz > 0.0)) throw config_error("scenario: carrier_ghz must be > 0");
    if (num_subbands < 1 || num_prbs < num_subbands) {
      throw config_error("scenario: need num_prbs >= num_subbands >= 1");
    }
    if (ues_per_cell < 1) throw config_error("scenario: ues_per_cell must be >= 1");
    if (!(bs_height_m > ue_height_m)) {
      throw config_error("scenario: bs_height_m must exceed ue_height_m");
    }
  }

  /// PRBs covered by one subband; the first (num_prbs % num_subbands)
  /// subbands carry one extra PRB.
  int prbs_in_subband(int sb) const {
    const int base = num_prbs / num_subbands;
    const int rem = num_prbs % num_subbands;
    return base + (sb < rem ? 1 : 0);
  }

  int subband_first_prb(int sb) const {
    const int base = num_prbs / num_subbands;
    const int rem = num_prbs % num_subbands;
    return sb * base + std::min(sb, rem);
  }

  int subband_of_prb(int prb) const {
    for (int s = 0; s < num_subbands; ++s) {
      if (prb < subband_first_prb(s) + prbs_in_subband(s)) return s;
    }
    return num_subbands - 1;
  }
};

/// Propagation/antenna/fading knobs that are model choices rather than
/// deployment facts. All overridable from the config file.
struct RadioModel {
  double ar1_rho = 0.9;              // small-scale time correlation
  double ricean_k_db = 9.0;          // LOS K-factor
  double antenna_max_gain_dbi = 8.0; // sector pattern peak
  double hpbw_deg = 65.0;            // half-power beamwidth
  double max_attenuation_db = 30.0;  // pattern floor
  double shadowing_sigma_los_db = 4.0;
  double shadowing_sigma_nlos_db = 6.0;
  double edge_rsrp_dbm = -100.0;     // edge-UE threshold
  double min_drop_distance_m = 35.0;
  double prb_bandwidth_hz = 180e3;
  int tracked_neighbors = 9;

  void validate() const {
    if (ar1_rho < 0.0 || ar1_rho > 1.0) throw config_error("radio: ar1_rho must be in [0,1]");
    if (tracked_neighbors < 1) throw config_error("radio: tracked_neighbors must be >= 1");
    if (!(prb_bandwidth_hz > 0.0)) throw config_error("radio: prb_bandwidth_hz must be > 0");
  }
};

}  // namespace pmisim
