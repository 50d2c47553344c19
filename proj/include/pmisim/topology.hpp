#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pmisim/rng.hpp"
#include "pmisim/scenario.hpp"

namespace pmisim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// One sector of a site.
struct CellGeometry {
  int pci = 0;
  Vec2 site_position;
  double boresight_deg = 0.0;
  int site_index = 0;
  int sector_index = 0;
};

/// Large-scale budget of one (UE, cell) link.
struct LinkBudget {
  double pathloss_db = 0.0;
  double shadowing_db = 0.0;
  double antenna_gain_db = 0.0;
  double rsrp_dbm = 0.0;
  bool is_serving = false;
  bool los = false;
  double d2d_m = 0.0;
  double azimuth_off_boresight_deg = 0.0;  // UE bearing relative to boresight
};

/// TR 38.901 urban-macro pathloss, LOS and NLOS branches.
inline double pathloss_uma(double d2d_m, double bs_height_m, double ue_height_m,
                           double freq_ghz, bool los) {
  if (d2d_m < 10.0 || d2d_m > 5000.0) {
    throw std::domain_error("pathloss_uma: 2D distance outside [10, 5000] m");
  }
  const double dh = bs_height_m - ue_height_m;
  const double d3d = std::sqrt(d2d_m * d2d_m + dh * dh);
  // Breakpoint with 1 m effective environment height.
  const double d_bp = 4.0 * (bs_height_m - 1.0) * (ue_height_m - 1.0) * freq_ghz * 1e9 / 3e8;
  const double pl_los =
      (d2d_m <= d_bp)
          ? 28.0 + 22.0 * std::log10(d3d) + 20.0 * std::log10(freq_ghz)
          : 28.0 + 40.0 * std::log10(d3d) + 20.0 * std::log10(freq_ghz) -
                9.0 * std::log10(d_bp * d_bp + dh * dh);
  if (los) return pl_los;
  const double pl_nlos = 13.54 + 39.08 * std::log10(d3d) + 20.0 * std::log10(freq_ghz) -
                         0.6 * (ue_height_m - 1.5);
  return std::max(pl_los, pl_nlos);
}

/// Distance-dependent LOS probability (UMa, UE below 13 m).
inline double los_probability_uma(double d2d_m) {
  if (d2d_m <= 18.0) return 1.0;
  return 18.0 / d2d_m + std::exp(-d2d_m / 63.0) * (1.0 - 18.0 / d2d_m);
}

/// Parabolic sector pattern: peak gain minus min(12 (off/hpbw)^2, floor).
inline double sector_gain_db(double off_boresight_deg, double max_gain_dbi,
                             double hpbw_deg, double max_attenuation_db) {
  double off = std::fmod(std::fabs(off_boresight_deg), 360.0);
  if (off > 180.0) off = 360.0 - off;
  const double att = std::min(12.0 * (off / hpbw_deg) * (off / hpbw_deg), max_attenuation_db);
  return max_gain_dbi - att;
}

inline double rsrp_dbm(double ref_power_dbm, double pathloss_db, double shadowing_db,
                       double antenna_gain_db) {
  return ref_power_dbm - pathloss_db - shadowing_db + antenna_gain_db;
}

/// Site centers on a hex grid: center site, then rings of 6 and 12.
inline std::vector<Vec2> hex_site_positions(int num_sites, double isd_m) {
  if (num_sites != 1 && num_sites != 7 && num_sites != 19) {
    throw std::invalid_argument("hex_site_positions: num_sites must be in {1, 7, 19}");
  }
  // Axial coordinates covering rings 0..2 in deterministic order.
  static constexpr int kAxial[19][2] = {
      {0, 0},
      {1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1},
      {2, 0}, {1, 1}, {0, 2}, {-1, 2}, {-2, 2}, {-2, 1},
      {-2, 0}, {-1, -1}, {0, -2}, {1, -2}, {2, -2}, {2, -1},
  };
  std::vector<Vec2> out;
  out.reserve(static_cast<size_t>(num_sites));
  for (int i = 0; i < num_sites; ++i) {
    const double q = kAxial[i][0];
    const double r = kAxial[i][1];
    out.push_back({isd_m * (q + r / 2.0), isd_m * (std::numbers::sqrt3 / 2.0) * r});
  }
  return out;
}

/// Immutable deployment: cells, UE positions, and per-link budgets.
///
/// Everything is drawn once from the scenario seed; the object is
/// read-only afterwards and safe to share across threads.
class Topology {
 public:
  Topology(const Scenario& sc, const RadioModel& rm) : sc_(sc), rm_(rm) {
    sc_.validate();
    rm_.validate();
    build_cells();
    drop_ues();
    build_links();
  }

  const Scenario& scenario() const { return sc_; }
  const RadioModel& radio() const { return rm_; }
  const std::vector<CellGeometry>& cells() const { return cells_; }
  const std::vector<Vec2>& ue_positions() const { return ues_; }
  int num_ues() const { return static_cast<int>(ues_.size()); }

  const LinkBudget& link(int ue, int pci) const {
    return links_[static_cast<size_t>(ue) * cells_.size() + static_cast<size_t>(pci)];
  }

  int serving_cell(int ue) const { return serving_[static_cast<size_t>(ue)]; }

  /// Cells ranked by RSRP, serving cell excluded.
  const std::vector<int>& neighbors(int ue) const { return neighbors_[static_cast<size_t>(ue)]; }

  /// Strongest neighbors tracked for interference accounting.
  const std::vector<int>& tracked_neighbors(int ue) const {
    return tracked_[static_cast<size_t>(ue)];
  }

  const std::vector<int>& attached_ues(int pci) const {
    return attached_[static_cast<size_t>(pci)];
  }

  bool is_edge_ue(int ue) const {
    return link(ue, serving_cell(ue)).rsrp_dbm < rm_.edge_rsrp_dbm;
  }

  /// Per-resource-element reference power the RSRP accounting uses.
  double rs_power_dbm() const {
    return sc_.bs_power_dbm - 10.0 * std::log10(12.0 * sc_.num_prbs);
  }

  /// Linear large-scale channel gain (pathloss, shadowing, sector gain).
  double linear_gain(int ue, int pci) const {
    const LinkBudget& lb = link(ue, pci);
    return std::pow(10.0, (-lb.pathloss_db - lb.shadowing_db + lb.antenna_gain_db) / 10.0);
  }

 private:
  void build_cells() {
    const std::vector<Vec2> sites = hex_site_positions(sc_.num_sites, sc_.isd_m);
    cells_.reserve(static_cast<size_t>(sc_.num_cells()));
    for (int s = 0; s < sc_.num_sites; ++s) {
      for (int k = 0; k < sc_.sectors_per_site; ++k) {
        CellGeometry cg;
        cg.pci = s * sc_.sectors_per_site + k;
        cg.site_position = sites[static_cast<size_t>(s)];
        cg.boresight_deg = 360.0 * k / sc_.sectors_per_site;
        cg.site_index = s;
        cg.sector_index = k;
        cells_.push_back(cg);
      }
    }
  }

  double bearing_off_boresight(const CellGeometry& cg, const Vec2& p) const {
    const double az =
        std::atan2(p.y - cg.site_position.y, p.x - cg.site_position.x) * 180.0 / std::numbers::pi;
    return az - cg.boresight_deg;
  }

  /// Geometry-only dominance score used for the UE drop (no shadowing).
  double dominance_score(const CellGeometry& cg, const Vec2& p) const {
    const double d = std::max(distance(cg.site_position, p), rm_.min_drop_distance_m);
    const double gain = sector_gain_db(bearing_off_boresight(cg, p), rm_.antenna_max_gain_dbi,
                                       rm_.hpbw_deg, rm_.max_attenuation_db);
    return gain - pathloss_uma(d, sc_.bs_height_m, sc_.ue_height_m, sc_.carrier_ghz, true);
  }

  void drop_ues() {
    ues_.reserve(static_cast<size_t>(sc_.num_ues()));
    const double radius = sc_.isd_m;  // covers any sector's dominance area
    for (const CellGeometry& cg : cells_) {
      int dropped = 0;
      for (std::uint64_t attempt = 0; dropped < sc_.ues_per_cell; ++attempt) {
        if (attempt > 200000) {
          throw std::runtime_error("drop_ues: dominance sampling did not converge");
        }
        KeyedRng rng(sc_.seed, stream::kUeDrop, static_cast<std::uint64_t>(cg.pci), attempt);
        const double r = radius * std::sqrt(rng.next_unit());
        const double th = rng.next_range(0.0, 2.0 * std::numbers::pi);
        const Vec2 p{cg.site_position.x + r * std::cos(th), cg.site_position.y + r * std::sin(th)};
        bool far_enough = true;
        for (const CellGeometry& other : cells_) {
          if (other.sector_index == 0 &&
              distance(other.site_position, p) < rm_.min_drop_distance_m) {
            far_enough = false;
            break;
          }
        }
        if (!far_enough) continue;
        int best = -1;
        double best_score = 0.0;
        for (const CellGeometry& other : cells_) {
          const double score = dominance_score(other, p);
          if (best < 0 || score > best_score) {
            best = other.pci;
            best_score = score;
          }
        }
        if (best != cg.pci) continue;
        ues_.push_back(p);
        ++dropped;
      }
    }
  }

  void build_links() {
    const int n_ues = num_ues();
    const int n_cells = static_cast<int>(cells_.size());
    links_.resize(static_cast<size_t>(n_ues) * n_cells);
    serving_.resize(static_cast<size_t>(n_ues));
    neighbors_.resize(static_cast<size_t>(n_ues));
    tracked_.resize(static_cast<size_t>(n_ues));
    attached_.assign(static_cast<size_t>(n_cells), {});

    const double ref_power = rs_power_dbm();
    for (int u = 0; u < n_ues; ++u) {
      for (const CellGeometry& cg : cells_) {
        LinkBudget lb;
        lb.d2d_m = std::max(distance(cg.site_position, ues_[static_cast<size_t>(u)]),
                            10.0);  // clamp to the model's validity floor
        KeyedRng los_rng(sc_.seed, stream::kLos, static_cast<std::uint64_t>(u),
                         static_cast<std::uint64_t>(cg.pci));
        lb.los = los_rng.next_unit() < los_probability_uma(lb.d2d_m);
        lb.pathloss_db =
            pathloss_uma(lb.d2d_m, sc_.bs_height_m, sc_.ue_height_m, sc_.carrier_ghz, lb.los);
        KeyedRng sh_rng(sc_.seed, stream::kShadowing, static_cast<std::uint64_t>(u),
                        static_cast<std::uint64_t>(cg.pci));
        const double sigma =
            lb.los ? rm_.shadowing_sigma_los_db : rm_.shadowing_sigma_nlos_db;
        lb.shadowing_db = sigma * sh_rng.next_gaussian();
        lb.azimuth_off_boresight_deg =
            bearing_off_boresight(cg, ues_[static_cast<size_t>(u)]);
        lb.antenna_gain_db =
            sector_gain_db(lb.azimuth_off_boresight_deg, rm_.antenna_max_gain_dbi, rm_.hpbw_deg,
                           rm_.max_attenuation_db);
        lb.rsrp_dbm = rsrp_dbm(ref_power, lb.pathloss_db, lb.shadowing_db, lb.antenna_gain_db);
        links_[static_cast<size_t>(u) * n_cells + static_cast<size_t>(cg.pci)] = lb;
      }

      int best = 0;
      for (int c = 1; c < n_cells; ++c) {
        if (link(u, c).rsrp_dbm > link(u, best).rsrp_dbm) best = c;
      }
      serving_[static_cast<size_t>(u)] = best;
      links_[static_cast<size_t>(u) * n_cells + static_cast<size_t>(best)].is_serving = true;
      attached_[static_cast<size_t>(best)].push_back(u);

      std::vector<int>& nb = neighbors_[static_cast<size_t>(u)];
      for (int c = 0; c < n_cells; ++c) {
        if (c != best) nb.push_back(c);
      }
      std::sort(nb.begin(), nb.end(), [&](int a, int b) {
        const double ra = link(u, a).rsrp_dbm;
        const double rb = link(u, b).rsrp_dbm;
        if (ra != rb) return ra > rb;
        return a < b;
      });
      std::vector<int>& tr = tracked_[static_cast<size_t>(u)];
      const int n_tracked = std::min<int>(rm_.tracked_neighbors, static_cast<int>(nb.size()));
      tr.assign(nb.begin(), nb.begin() + n_tracked);
    }
  }

  Scenario sc_;
  RadioModel rm_;
  std::vector<CellGeometry> cells_;
  std::vector<Vec2> ues_;
  std::vector<LinkBudget> links_;
  std::vector<int> serving_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> tracked_;
  std::vector<std::vector<int>> attached_;
};

}  // namespace pmisim
