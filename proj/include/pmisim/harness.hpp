#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pmisim/bus.hpp"
#include "pmisim/rl.hpp"
#include "pmisim/scenario.hpp"
#include "pmisim/sim.hpp"
#include "pmisim/stats.hpp"
#include "pmisim/xapp.hpp"

namespace pmisim {

class runtime_abort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AgentKind { kFollowPmi, kA2c, kInterA2c, kRandom };

inline const char* agent_name(AgentKind a) {
  switch (a) {
    case AgentKind::kFollowPmi:
      return "follow_pmi";
    case AgentKind::kA2c:
      return "a2c";
    case AgentKind::kInterA2c:
      return "inter_a2c";
    default:
      return "random";
  }
}

inline AgentKind agent_from_name(const std::string& s) {
  if (s == "follow_pmi") return AgentKind::kFollowPmi;
  if (s == "a2c") return AgentKind::kA2c;
  if (s == "inter_a2c") return AgentKind::kInterA2c;
  if (s == "random") return AgentKind::kRandom;
  throw config_error("unknown agent '" + s + "'");
}

struct ExperimentConfig {
  Scenario scenario;
  RadioModel radio;
  CodebookConfig codebook;
  AgentKind agent = AgentKind::kFollowPmi;
  int episodes = 100;
  int ttis_per_episode = 10;
  A2cConfig rl;
  RewardConstants reward;
  TrafficMode traffic = TrafficMode::kFixedRate;
  double demand_mbps = 1.0;
  double thr_cap_mbps = 50.0;
  double ue_cap = 50.0;
  double interf_decades = 6.0;
  double beta_fraction = 0.2;
  std::string out_dir = "out";
  std::string bus_tcp_addr;  // empty = in-process only
  std::string checkpoint;

  void validate() const {
    scenario.validate();
    radio.validate();
    rl.validate();
    if (episodes < 1) throw config_error("episodes must be >= 1");
    if (ttis_per_episode < 1) throw config_error("ttis_per_episode must be >= 1");
    if (demand_mbps < 0.0) throw config_error("demand_mbps must be >= 0");
  }
};

/// Loads the flat JSON config; unknown keys are rejected to catch typos.
inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  static const std::vector<std::string> known = {
      "sites", "sectors_per_site", "isd_m", "carrier_ghz", "bandwidth_mhz", "num_prbs",
      "num_subbands", "ues_per_cell", "bs_power_dbm", "bs_height_m", "ue_height_m",
      "noise_figure_db", "seed", "ar1_rho", "ricean_k_db", "antenna_max_gain_dbi", "hpbw_deg",
      "max_attenuation_db", "shadow_sigma_los_db", "shadow_sigma_nlos_db", "edge_rsrp_dbm",
      "min_drop_distance_m", "prb_bandwidth_hz", "tracked_neighbors", "cb_n1", "cb_n2", "cb_o1",
      "cb_o2", "agent", "episodes", "ttis_per_episode", "n_steps", "discount", "learning_rate",
      "value_coef", "entropy_coef", "grad_clip", "rms_alpha", "rms_eps", "gamma_target", "alpha",
      "wp", "traffic_mode", "demand_mbps", "thr_cap_mbps", "ue_cap", "interf_decades",
      "beta_fraction", "out_dir", "bus.tcp_addr", "checkpoint"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw config_error("unknown config key '" + key + "'");
    }
    (void)value;
  }
  const auto get = [&](const char* key, auto& slot) {
    if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
  };
  get("sites", c.scenario.num_sites);
  get("sectors_per_site", c.scenario.sectors_per_site);
  get("isd_m", c.scenario.isd_m);
  get("carrier_ghz", c.scenario.carrier_ghz);
  get("bandwidth_mhz", c.scenario.bandwidth_mhz);
  get("num_prbs", c.scenario.num_prbs);
  get("num_subbands", c.scenario.num_subbands);
  get("ues_per_cell", c.scenario.ues_per_cell);
  get("bs_power_dbm", c.scenario.bs_power_dbm);
  get("bs_height_m", c.scenario.bs_height_m);
  get("ue_height_m", c.scenario.ue_height_m);
  get("noise_figure_db", c.scenario.noise_figure_db);
  get("seed", c.scenario.seed);
  get("ar1_rho", c.radio.ar1_rho);
  get("ricean_k_db", c.radio.ricean_k_db);
  get("antenna_max_gain_dbi", c.radio.antenna_max_gain_dbi);
  get("hpbw_deg", c.radio.hpbw_deg);
  get("max_attenuation_db", c.radio.max_attenuation_db);
  get("shadow_sigma_los_db", c.radio.shadowing_sigma_los_db);
  get("shadow_sigma_nlos_db", c.radio.shadowing_sigma_nlos_db);
  get("edge_rsrp_dbm", c.radio.edge_rsrp_dbm);
  get("min_drop_distance_m", c.radio.min_drop_distance_m);
  get("prb_bandwidth_hz", c.radio.prb_bandwidth_hz);
  get("tracked_neighbors", c.radio.tracked_neighbors);
  get("cb_n1", c.codebook.n1);
  get("cb_n2", c.codebook.n2);
  get("cb_o1", c.codebook.o1);
  get("cb_o2", c.codebook.o2);
  if (j.contains("agent")) c.agent = agent_from_name(j.at("agent").get<std::string>());
  get("episodes", c.episodes);
  get("ttis_per_episode", c.ttis_per_episode);
  get("n_steps", c.rl.n_steps);
  get("discount", c.rl.discount);
  get("learning_rate", c.rl.learning_rate);
  get("value_coef", c.rl.value_coef);
  get("entropy_coef", c.rl.entropy_coef);
  get("grad_clip", c.rl.grad_clip);
  get("rms_alpha", c.rl.rms_alpha);
  get("rms_eps", c.rl.rms_eps);
  get("gamma_target", c.reward.gamma_target);
  get("alpha", c.reward.alpha);
  get("wp", c.reward.wp);
  if (j.contains("traffic_mode")) {
    const std::string m = j.at("traffic_mode").get<std::string>();
    if (m == "full_buffer") {
      c.traffic = TrafficMode::kFullBuffer;
    } else if (m == "fixed_rate") {
      c.traffic = TrafficMode::kFixedRate;
    } else {
      throw config_error("traffic_mode must be 'fixed_rate' or 'full_buffer'");
    }
  }
  get("demand_mbps", c.demand_mbps);
  get("thr_cap_mbps", c.thr_cap_mbps);
  get("ue_cap", c.ue_cap);
  get("interf_decades", c.interf_decades);
  get("beta_fraction", c.beta_fraction);
  get("out_dir", c.out_dir);
  get("bus.tcp_addr", c.bus_tcp_addr);
  get("checkpoint", c.checkpoint);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV helpers: '.' decimal, LF endings, shortest round-trip doubles.

inline std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct MetricsRow {
  int episode = 0;
  long long tti = 0;
  int pci = 0;
  double mean_se = 0.0;
  double mean_thr_mbps = 0.0;
  double prb_util = 0.0;
  double cell_interference_mw = 0.0;
  double gamma_se = 0.0;
  double interf_cost = 0.0;
  double reward = 0.0;
  int optimized = 0;
  std::string agent;
};

inline constexpr const char* kMetricsHeader =
    "episode,tti,pci,mean_se,mean_thr_mbps,prb_util,cell_interference_mw,gamma_se,"
    "interf_cost,reward,optimized,agent";

inline void write_metrics_csv(const std::filesystem::path& path,
                              std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  out << kMetricsHeader << "\n";
  for (const MetricsRow& r : rows) {
    out << r.episode << ',' << r.tti << ',' << r.pci << ',' << fmt_double(r.mean_se) << ','
        << fmt_double(r.mean_thr_mbps) << ',' << fmt_double(r.prb_util) << ','
        << fmt_double(r.cell_interference_mw) << ',' << fmt_double(r.gamma_se) << ','
        << fmt_double(r.interf_cost) << ',' << fmt_double(r.reward) << ',' << r.optimized << ','
        << r.agent << "\n";
  }
}

inline void write_cdf_csv(const std::filesystem::path& path, std::vector<double> samples,
                          const std::string& value_name) {
  std::sort(samples.begin(), samples.end());
  std::ofstream out(path, std::ios::binary);
  out << value_name << ",cdf\n";
  const double n = static_cast<double>(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    out << fmt_double(samples[i]) << ',' << fmt_double(static_cast<double>(i + 1) / n) << "\n";
  }
}

// ---------------------------------------------------------------------------

struct EpisodeResult {
  Trajectory trajectory;
  std::vector<MetricsRow> rows;
  double mean_reward = 0.0;
  std::vector<double> se_samples;   // per UE per logged TTI
  std::vector<double> thr_samples;
};

enum class PolicyMode { kFollow, kSample, kGreedy, kRandom };

/// Wires simulator, bus, and decision layer together and drives episodes.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(const ExperimentConfig& cfg, bool hash_channels = true)
      : cfg_(cfg),
        sim_(cfg.scenario, cfg.radio, cfg.codebook,
             SimOptions{cfg.traffic, cfg.demand_mbps, hash_channels}),
        csi_queue_(bus_, "csi.>"),
        ctrl_queue_(bus_, "ctrl.>") {
    norms_.num_prbs = cfg_.scenario.num_prbs;
    norms_.sigma2_mw = sim_.sigma2_prb_mw();
    norms_.decades = cfg_.interf_decades;
    norms_.thr_cap_mbps = cfg_.thr_cap_mbps;
    norms_.ue_cap = cfg_.ue_cap;
    norms_.prb_bandwidth_hz = cfg_.radio.prb_bandwidth_hz;
    rules_.edge_rsrp_dbm = cfg_.radio.edge_rsrp_dbm;
    rules_.beta_fraction = cfg_.beta_fraction;
    if (!cfg_.bus_tcp_addr.empty()) {
      tcp_server_ = std::make_unique<TcpBusServer>(bus_, cfg_.bus_tcp_addr);
    }
  }

  DownlinkSim& sim() { return sim_; }
  Bus& bus() { return bus_; }
  TcpBusServer* tcp_server() { return tcp_server_.get(); }
  const StateNorms& norms() const { return norms_; }
  const GroupRules& rules() const { return rules_; }

  void attach_net(PolicyValueNet* net, A2cUpdater* updater) {
    net_ = net;
    updater_ = updater;
  }

  /// Invoked with the realized metrics of every TTI (inspection hook).
  void set_step_observer(std::function<void(const StepMetrics&)> fn) {
    step_observer_ = std::move(fn);
  }

  /// Head sizes of the policy for the configured agent.
  std::vector<int> head_sizes() const {
    if (cfg_.agent == AgentKind::kA2c) {
      return {sim_.codebook().rank1_size(), sim_.codebook().rank2_size()};
    }
    return {3, sim_.codebook().rank1_size(), sim_.codebook().rank2_size()};
  }

  struct Observation {
    std::vector<CellObservation> cells;
    int target = 0;
    Groups groups;
    MdpState state;
    bool valid = false;
  };

  EpisodeResult run_episode(int episode_index, PolicyMode mode) {
    EpisodeResult res;
    last_group_.assign(static_cast<size_t>(cfg_.scenario.num_cells()), GroupKind::kAll);
    sim_.reset_episode(static_cast<std::uint64_t>(episode_index));
    Trajectory chunk;
    int consecutive_bad = 0;

    for (int step = 1; step <= cfg_.ttis_per_episode; ++step) {
      publish_reports();
      const std::vector<CsiReport> reports = drain_reports();
      const Observation obs = observe(reports);

      std::optional<ControlDirective> directive;
      TrajectoryStep traj_step;
      bool rl_step = false;
      double rejected_penalty = 0.0;

      if (mode == PolicyMode::kFollow) {
        for (ControlDirective& d : follow_pmi_directives(reports, sim_.tti())) {
          publish_directive(d);
        }
      } else if (obs.valid) {
        int g_idx = 2, p1 = 0, p2 = 0;
        if (mode == PolicyMode::kRandom) {
          KeyedRng rng(cfg_.scenario.seed, stream::kPolicy,
                       static_cast<std::uint64_t>(episode_index),
                       static_cast<std::uint64_t>(step));
          g_idx = static_cast<int>(rng.next_below(3));
          p1 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(sim_.codebook().rank1_size())));
          p2 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(sim_.codebook().rank2_size())));
        } else {
          const PolicyValueNet::Forward f = net_->forward(obs.state.v);
          const bool plain = cfg_.agent == AgentKind::kA2c;
          traj_step.value = f.value;
          if (mode == PolicyMode::kSample) {
            KeyedRng rng(cfg_.scenario.seed, stream::kPolicy,
                         static_cast<std::uint64_t>(episode_index),
                         static_cast<std::uint64_t>(step));
            if (plain) {
              p1 = sample_categorical(f.logits[0], rng);
              p2 = sample_categorical(f.logits[1], rng);
              traj_step.log_prob = log_prob(f.logits[0], p1) + log_prob(f.logits[1], p2);
              traj_step.actions = {p1, p2};
            } else {
              g_idx = sample_categorical(f.logits[0], rng);
              p1 = sample_categorical(f.logits[1], rng);
              p2 = sample_categorical(f.logits[2], rng);
              traj_step.log_prob = log_prob(f.logits[0], g_idx) + log_prob(f.logits[1], p1) +
                                   log_prob(f.logits[2], p2);
              traj_step.actions = {g_idx, p1, p2};
            }
          } else {  // greedy
            if (plain) {
              p1 = argmax(f.logits[0]);
              p2 = argmax(f.logits[1]);
              traj_step.actions = {p1, p2};
            } else {
              g_idx = argmax(f.logits[0]);
              p1 = argmax(f.logits[1]);
              p2 = argmax(f.logits[2]);
              traj_step.actions = {g_idx, p1, p2};
            }
          }
          if (plain) g_idx = static_cast<int>(GroupKind::kAll);
          rl_step = mode == PolicyMode::kSample;
        }
        const AgentAction act = decode_action(
            g_idx, p1, p2, obs.groups, obs.cells[static_cast<size_t>(obs.target)],
            sim_.codebook());
        if (act.rejected) {
          rejected_penalty = -10.0;
        } else {
          last_group_[static_cast<size_t>(obs.target)] = act.group;
          if (!act.resolved.empty()) {
            ControlDirective d;
            d.pci = obs.target;
            d.tti = sim_.tti();
            d.agent = agent_name(cfg_.agent);
            d.assignments = act.resolved;
            publish_directive(d);
            directive = std::move(d);
          }
        }
        traj_step.state.assign(obs.state.v.begin(), obs.state.v.end());
      }

      // The simulator drains its control subscription and advances.
      const std::vector<ControlDirective> to_apply = drain_directives();
      const StepMetrics metrics = sim_.step(to_apply);
      if (step_observer_) step_observer_(metrics);

      // Reward on the optimized cell, over the UEs the action selected.
      const int target = obs.valid ? obs.target : 0;
      std::vector<RealizedUe> whole = realized_of(metrics, target);
      std::vector<RealizedUe> selected;
      if (directive) {
        for (const PmiAssignment& a : directive->assignments) {
          for (const RealizedUe& ru : whole) {
            if (ru.ue == a.ue) selected.push_back(ru);
          }
        }
      } else if (mode != PolicyMode::kFollow && obs.valid) {
        // No-op action (empty group): honest reward over the whole cell.
        selected.clear();
      }
      RewardBreakdown rb;
      if (!whole.empty()) {
        rb = compute_reward(selected, whole,
                            metrics.cells[static_cast<size_t>(target)].prb_util, cfg_.reward,
                            norms_);
        rb.reward += rejected_penalty;
      }
      res.mean_reward += rb.reward;

      append_rows(res, metrics, episode_index, target, rb);
      for (const CellStep& cs : metrics.cells) {
        for (const UeRealized& ru : cs.ues) {
          res.se_samples.push_back(ru.se);
          res.thr_samples.push_back(ru.thr_mbps);
        }
      }

      if (rl_step) {
        traj_step.reward = rb.reward;
        traj_step.done = step == cfg_.ttis_per_episode;
        chunk.push_back(traj_step);
        res.trajectory.push_back(traj_step);
        if (static_cast<int>(chunk.size()) == cfg_.rl.n_steps || traj_step.done) {
          double bootstrap = 0.0;
          if (!traj_step.done) {
            const Observation next = observe(sim_.reports());
            if (next.valid) bootstrap = net_->forward(next.state.v).value;
          }
          const Returns rets = n_step_returns(chunk, bootstrap, cfg_.rl);
          std::vector<UpdateSample> batch(chunk.size());
          for (size_t i = 0; i < chunk.size(); ++i) {
            batch[i] = {chunk[i].state, chunk[i].actions, rets.returns[i], rets.advantages[i]};
          }
          const UpdateStats st = updater_->update(batch);
          if (st.skipped) {
            if (++consecutive_bad >= 2) {
              throw runtime_abort("training diverged: non-finite loss twice in a row");
            }
          } else {
            consecutive_bad = 0;
          }
          chunk.clear();
        }
      }
    }
    res.mean_reward /= static_cast<double>(cfg_.ttis_per_episode);
    return res;
  }

  /// Builds the controller-side observation from CSI reports.
  Observation observe(std::span<const CsiReport> reports) {
    Observation obs;
    obs.cells = group_reports_by_cell(reports, cfg_.scenario.num_cells());
    std::vector<double> interference(obs.cells.size(), 0.0);
    for (size_t c = 0; c < obs.cells.size(); ++c) {
      interference[c] = obs.cells[c].total_interference_mw();
    }
    obs.target = select_target_cell(interference);
    const CellObservation& cell = obs.cells[static_cast<size_t>(obs.target)];
    if (cell.ues.empty()) {
      obs.valid = false;
      return obs;
    }
    obs.groups = identify_groups(cell, rules_);
    obs.state = build_state(cell, obs.groups.of(last_group_[static_cast<size_t>(obs.target)]),
                            norms_);
    obs.valid = true;
    return obs;
  }

 private:
  void publish_reports() {
    for (const CsiReport& r : sim_.reports()) {
      BusMessage m;
      m.subject = "csi.cell." + std::to_string(r.pci) + ".ue." + std::to_string(r.ue);
      m.tti = r.tti + 1;  // delivered one TTI after measurement
      m.payload = to_json(r);
      bus_.publish(m);
    }
  }

  void publish_directive(const ControlDirective& d) {
    BusMessage m;
    m.subject = "ctrl.cell." + std::to_string(d.pci);
    m.tti = d.tti;
    m.payload = to_json(d);
    bus_.publish(m);
  }

  std::vector<CsiReport> drain_reports() {
    std::vector<CsiReport> out;
    for (const BusMessage& m : csi_queue_.drain()) {
      out.push_back(csi_report_from_json(m.payload));
    }
    return out;
  }

  std::vector<ControlDirective> drain_directives() {
    std::vector<ControlDirective> out;
    for (const BusMessage& m : ctrl_queue_.drain()) {
      out.push_back(control_directive_from_json(m.payload));
    }
    return out;
  }

  static std::vector<RealizedUe> realized_of(const StepMetrics& metrics, int pci) {
    std::vector<RealizedUe> out;
    for (const UeRealized& ru : metrics.cells.at(static_cast<size_t>(pci)).ues) {
      out.push_back({ru.ue, ru.wb_cqi, ru.i_uk_mw});
    }
    return out;
  }

  void append_rows(EpisodeResult& res, const StepMetrics& metrics, int episode, int target,
                   const RewardBreakdown& target_rb) {
    for (const CellStep& cs : metrics.cells) {
      MetricsRow row;
      row.episode = episode;
      row.tti = metrics.tti;
      row.pci = cs.pci;
      row.mean_se = cs.mean_se;
      row.mean_thr_mbps = cs.mean_thr_mbps;
      row.prb_util = cs.prb_util;
      row.cell_interference_mw = cs.interference_mw;
      row.optimized = cs.pci == target ? 1 : 0;
      row.agent = agent_name(cfg_.agent);
      if (cs.pci == target) {
        row.gamma_se = target_rb.gamma_se;
        row.interf_cost = target_rb.interf_cost;
        row.reward = target_rb.reward;
      } else if (!cs.ues.empty()) {
        std::vector<RealizedUe> all = realized_of(metrics, cs.pci);
        const RewardBreakdown rb =
            compute_reward({}, all, cs.prb_util, cfg_.reward, norms_);
        row.gamma_se = rb.gamma_se;
        row.interf_cost = rb.interf_cost;
        row.reward = rb.reward;
      }
      res.rows.push_back(std::move(row));
    }
  }

  ExperimentConfig cfg_;
  Bus bus_;
  DownlinkSim sim_;
  MessageQueue csi_queue_;
  MessageQueue ctrl_queue_;
  std::unique_ptr<TcpBusServer> tcp_server_;
  StateNorms norms_;
  GroupRules rules_;
  std::vector<GroupKind> last_group_;
  PolicyValueNet* net_ = nullptr;
  A2cUpdater* updater_ = nullptr;
  std::function<void(const StepMetrics&)> step_observer_;
};

// ---------------------------------------------------------------------------
// Commands

struct TrainResult {
  std::vector<double> episode_rewards;
  std::filesystem::path checkpoint_path;
};

inline void write_reward_curve(const std::filesystem::path& path,
                               std::span<const double> rewards) {
  std::ofstream out(path, std::ios::binary);
  out << "episode,mean_reward,smoothed_reward\n";
  double window_sum = 0.0;
  constexpr size_t kWindow = 100;
  for (size_t i = 0; i < rewards.size(); ++i) {
    window_sum += rewards[i];
    if (i >= kWindow) window_sum -= rewards[i - kWindow];
    const double smooth = window_sum / static_cast<double>(std::min(i + 1, kWindow));
    out << i << ',' << fmt_double(rewards[i]) << ',' << fmt_double(smooth) << "\n";
  }
}

inline TrainResult train(const ExperimentConfig& cfg) {
  if (cfg.agent != AgentKind::kA2c && cfg.agent != AgentKind::kInterA2c) {
    throw config_error("train requires agent 'a2c' or 'inter_a2c'");
  }
  std::filesystem::create_directories(cfg.out_dir);
  ExperimentRunner runner(cfg, /*hash_channels=*/false);
  PolicyValueNet net(6, runner.head_sizes(), cfg.scenario.seed);
  A2cUpdater updater(net, cfg.rl);
  runner.attach_net(&net, &updater);

  TrainResult tr;
  tr.episode_rewards.reserve(static_cast<size_t>(cfg.episodes));
  try {
    for (int ep = 0; ep < cfg.episodes; ++ep) {
      const EpisodeResult res = runner.run_episode(ep, PolicyMode::kSample);
      tr.episode_rewards.push_back(res.mean_reward);
    }
  } catch (const runtime_abort&) {
    // Divergence: dump state for post-mortem, then propagate.
    std::ofstream dump(std::filesystem::path(cfg.out_dir) / "abort_state.json");
    dump << net.checkpoint().dump(2) << "\n";
    throw;
  }
  write_reward_curve(std::filesystem::path(cfg.out_dir) / "reward_curve.csv",
                     tr.episode_rewards);
  tr.checkpoint_path = std::filesystem::path(cfg.out_dir) / "checkpoint.json";
  std::ofstream ck(tr.checkpoint_path, std::ios::binary);
  ck << net.checkpoint().dump() << "\n";
  return tr;
}

struct EvalResult {
  std::vector<MetricsRow> rows;
  std::vector<double> se_samples;
  std::vector<double> thr_samples;
  double mean_se = 0.0;
  double mean_thr_mbps = 0.0;
  double mean_prb_util = 0.0;
  double mean_interference_mw = 0.0;
  double mean_reward = 0.0;
  std::uint64_t channel_hash = 0;
};

inline PolicyValueNet load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw config_error(std::string("checkpoint parse error: ") + e.what());
  }
  return PolicyValueNet::load(j);
}

/// Runs greedy (or baseline) episodes and aggregates; write_files controls
/// whether the CSV/JSON artifacts land in cfg.out_dir.
inline EvalResult evaluate(const ExperimentConfig& cfg, bool write_files = true,
                           bool full_outputs = true) {
  ExperimentRunner runner(cfg);
  std::optional<PolicyValueNet> net;
  std::optional<A2cUpdater> updater;
  PolicyMode mode = PolicyMode::kFollow;
  if (cfg.agent == AgentKind::kA2c || cfg.agent == AgentKind::kInterA2c) {
    if (!cfg.checkpoint.empty()) {
      net = load_checkpoint_file(cfg.checkpoint);
      const std::vector<int> expect = runner.head_sizes();
      if (net->head_sizes() != expect || net->in_dim() != 6) {
        throw config_error("checkpoint architecture does not match config");
      }
    } else {
      net.emplace(6, runner.head_sizes(), cfg.scenario.seed);
    }
    updater.emplace(*net, cfg.rl);
    runner.attach_net(&*net, &*updater);
    mode = PolicyMode::kGreedy;
  } else if (cfg.agent == AgentKind::kRandom) {
    mode = PolicyMode::kRandom;
  }

  EvalResult ev;
  std::map<int, std::pair<double, int>> per_cell_se;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    EpisodeResult res = runner.run_episode(ep, mode);
    ev.mean_reward += res.mean_reward;
    for (MetricsRow& r : res.rows) {
      ev.mean_se += r.mean_se;
      ev.mean_thr_mbps += r.mean_thr_mbps;
      ev.mean_prb_util += r.prb_util;
      ev.mean_interference_mw += r.cell_interference_mw;
      auto& [sum, count] = per_cell_se[r.pci];
      sum += r.mean_se;
      ++count;
      ev.rows.push_back(std::move(r));
    }
    ev.se_samples.insert(ev.se_samples.end(), res.se_samples.begin(), res.se_samples.end());
    ev.thr_samples.insert(ev.thr_samples.end(), res.thr_samples.begin(), res.thr_samples.end());
  }
  const double n_rows = static_cast<double>(ev.rows.size());
  ev.mean_se /= n_rows;
  ev.mean_thr_mbps /= n_rows;
  ev.mean_prb_util /= n_rows;
  ev.mean_interference_mw /= n_rows;
  ev.mean_reward /= static_cast<double>(cfg.episodes);
  ev.channel_hash = runner.sim().channel_hash();

  if (write_files) {
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    write_metrics_csv(dir / "metrics.csv", ev.rows);
    json summary{{"agent", agent_name(cfg.agent)},
                 {"episodes", cfg.episodes},
                 {"rows", ev.rows.size()},
                 {"mean_se", ev.mean_se},
                 {"mean_thr_mbps", ev.mean_thr_mbps},
                 {"mean_prb_util", ev.mean_prb_util},
                 {"mean_interference_mw", ev.mean_interference_mw},
                 {"mean_reward", ev.mean_reward},
                 {"channel_hash", ev.channel_hash}};
    std::ofstream sj(dir / "summary.json", std::ios::binary);
    sj << summary.dump(2) << "\n";
    if (full_outputs) {
      write_cdf_csv(dir / "cdf_se.csv", ev.se_samples, "se");
      write_cdf_csv(dir / "cdf_thr.csv", ev.thr_samples, "thr_mbps");
      std::ofstream pc(dir / "per_cell_se.csv", std::ios::binary);
      pc << "pci,mean_se\n";
      for (const auto& [pci, acc] : per_cell_se) {
        pc << pci << ',' << fmt_double(acc.first / acc.second) << "\n";
      }
    }
  }
  return ev;
}

/// `run` is `evaluate` without the CDF/per-cell extras.
inline EvalResult run_experiment(const ExperimentConfig& cfg) {
  return evaluate(cfg, true, false);
}

/// Evaluates the three policies on one scenario with common random numbers
/// and writes comparison.csv (three summary rows, three pairwise deltas).
inline void compare(const ExperimentConfig& base, const std::string& a2c_checkpoint,
                    const std::string& inter_checkpoint) {
  const std::filesystem::path dir(base.out_dir);
  std::filesystem::create_directories(dir);
  struct Entry {
    std::string name;
    EvalResult ev;
  };
  std::vector<Entry> entries;
  for (AgentKind agent : {AgentKind::kFollowPmi, AgentKind::kA2c, AgentKind::kInterA2c}) {
    ExperimentConfig cfg = base;
    cfg.agent = agent;
    cfg.checkpoint = agent == AgentKind::kA2c      ? a2c_checkpoint
                     : agent == AgentKind::kInterA2c ? inter_checkpoint
                                                     : "";
    cfg.out_dir = (dir / agent_name(agent)).string();
    entries.push_back({agent_name(agent), evaluate(cfg, true, true)});
  }
  for (const Entry& e : entries) {
    if (e.ev.channel_hash != entries[0].ev.channel_hash) {
      throw runtime_abort("compare: channel realizations differ between agents");
    }
  }
  std::ofstream out(dir / "comparison.csv", std::ios::binary);
  out << "kind,agent,agent_b,mean_se,mean_thr_mbps,mean_prb_util,mean_interference_mw,"
         "mean_reward\n";
  for (const Entry& e : entries) {
    out << "summary," << e.name << ",," << fmt_double(e.ev.mean_se) << ','
        << fmt_double(e.ev.mean_thr_mbps) << ',' << fmt_double(e.ev.mean_prb_util) << ','
        << fmt_double(e.ev.mean_interference_mw) << ',' << fmt_double(e.ev.mean_reward) << "\n";
  }
  const auto delta = [&](const Entry& a, const Entry& b) {
    out << "delta," << a.name << ',' << b.name << ',' << fmt_double(a.ev.mean_se - b.ev.mean_se)
        << ',' << fmt_double(a.ev.mean_thr_mbps - b.ev.mean_thr_mbps) << ','
        << fmt_double(a.ev.mean_prb_util - b.ev.mean_prb_util) << ','
        << fmt_double(a.ev.mean_interference_mw - b.ev.mean_interference_mw) << ','
        << fmt_double(a.ev.mean_reward - b.ev.mean_reward) << "\n";
  };
  delta(entries[1], entries[0]);
  delta(entries[2], entries[0]);
  delta(entries[2], entries[1]);
}

/// Codebook dump for inspection.
inline void dump_codebook_csv(const Codebook& cb, std::ostream& out) {
  out << "rank,j,l,m,offset,cophase,port,col,re,im\n";
  for (int rank = 1; rank <= 2; ++rank) {
    for (int j = 0; j < cb.size(rank); ++j) {
      const CMat& w = cb.get_pm(rank, j);
      const PmiTuple t = cb.tuple_of(rank, j);
      for (int p = 0; p < w.rows(); ++p) {
        for (int c = 0; c < w.cols(); ++c) {
          out << rank << ',' << j << ',' << t.l << ',' << t.m << ',' << t.offset << ','
              << t.cophase << ',' << p << ',' << c << ',' << fmt_double(w(p, c).real()) << ','
              << fmt_double(w(p, c).imag()) << "\n";
        }
      }
    }
  }
}

}  // namespace pmisim
