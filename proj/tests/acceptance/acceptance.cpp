// End-to-end acceptance suite. Each criterion prints exactly one
// PASS/FAIL line; the exit code is the number of failures.
//
// Usage: acceptance [--only N[,M...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pmisim/harness.hpp"

namespace fs = std::filesystem;
using namespace pmisim;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

ExperimentConfig desk_config() {
  ExperimentConfig cfg;  // 7 sites x 3 sectors, 210 UEs
  cfg.out_dir = "acceptance_out";
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --------------------------------------------------------------------------

bool criterion1_codebook(std::string& detail) {
  Timer timer;
  const Codebook cb;
  bool ok = cb.rank1_size() == 64 && cb.rank2_size() == 128;
  double worst_norm = 0.0, worst_orth = 0.0, worst_port = 0.0;
  for (int rank = 1; rank <= 2 && ok; ++rank) {
    for (int j = 0; j < cb.size(rank); ++j) {
      const CMat& w = cb.get_pm(rank, j);
      worst_norm = std::max(worst_norm, std::fabs(w.frob_sq() - 1.0));
      if (rank == 2) worst_orth = std::max(worst_orth, std::abs(w.col_dot(0, 1)));
      for (int p = 0; p < w.rows(); ++p) {
        double row = 0.0;
        for (int c = 0; c < w.cols(); ++c) row += std::norm(w(p, c));
        worst_port = std::max(worst_port, std::fabs(row - 0.125));
      }
    }
  }
  ok = ok && worst_norm < 1e-12 && worst_orth < 1e-12 && worst_port < 1e-12;
  const double secs = timer.seconds();
  ok = ok && secs < 1.0;
  std::ostringstream os;
  os << "sizes 64/128, |norm-1|<=" << worst_norm << ", |col dot|<=" << worst_orth
     << ", |port power-1/8|<=" << worst_port << ", " << secs << " s";
  detail = os.str();
  return ok;
}

bool criterion2_follow_pmi_oracle(std::string& detail) {
  Timer timer;
  const Codebook cb;
  KeyedRng rng(20240901, stream::kOracle);
  int matches = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    CMat h(2, 8);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 8; ++c) h(r, c) = rng.next_cn01();
    }
    // Production path.
    const std::vector<CMat> sb{h};
    const PmiSelection sel = ue_select_pmi(sb, cb, 1.0);
    // Independent exhaustive search over all 192 candidates, recomputed
    // from the effective channel with a direct 2x2 inverse.
    int best_rank = 1, best_j = 0;
    double best_se = -1.0;
    for (int rank = 1; rank <= 2; ++rank) {
      for (int j = 0; j < cb.size(rank); ++j) {
        const CMat& w = cb.get_pm(rank, j);
        cplx g[2][2] = {};
        for (int r = 0; r < 2; ++r) {
          for (int c = 0; c < rank; ++c) {
            cplx acc{0.0, 0.0};
            for (int k = 0; k < 8; ++k) acc += h(r, k) * w(k, c);
            g[r][c] = acc;
          }
        }
        double se;
        if (rank == 1) {
          se = std::log2(1.0 + std::norm(g[0][0]) + std::norm(g[1][0]));
        } else {
          const cplx a11 = std::conj(g[0][0]) * g[0][0] + std::conj(g[1][0]) * g[1][0] + 1.0;
          const cplx a12 = std::conj(g[0][0]) * g[0][1] + std::conj(g[1][0]) * g[1][1];
          const cplx a22 = std::conj(g[0][1]) * g[0][1] + std::conj(g[1][1]) * g[1][1] + 1.0;
          const cplx det = a11 * a22 - a12 * std::conj(a12);
          const double sinr1 = 1.0 / ((a22 / det).real()) - 1.0;
          const double sinr2 = 1.0 / ((a11 / det).real()) - 1.0;
          se = std::log2(1.0 + sinr1) + std::log2(1.0 + sinr2);
        }
        if (se > best_se) {
          best_se = se;
          best_rank = rank;
          best_j = j;
        }
      }
    }
    if (sel.ri == best_rank && sel.pmi[0] == best_j) ++matches;
  }
  const double secs = timer.seconds();
  std::ostringstream os;
  os << matches << "/" << trials << " exact matches, " << secs << " s";
  detail = os.str();
  return matches == trials && secs < 10.0;
}

struct LoggedRun {
  std::vector<MetricsRow> rows;
  bool eq9_exact = true;
  long long ttis_checked = 0;
};

LoggedRun logged_random_run(int episodes) {
  ExperimentConfig cfg = desk_config();
  cfg.agent = AgentKind::kRandom;
  cfg.episodes = episodes;
  ExperimentRunner runner(cfg, /*hash_channels=*/false);
  LoggedRun out;
  runner.set_step_observer([&out](const StepMetrics& m) {
    ++out.ttis_checked;
    for (const CellStep& cell : m.cells) {
      double cell_sum = 0.0;
      for (const UeRealized& u : cell.ues) {
        double ue_sum = 0.0;
        for (double v : u.iota_mw) ue_sum += v;
        if (u.i_uk_mw != ue_sum) out.eq9_exact = false;
        cell_sum += u.i_uk_mw;
      }
      if (cell.interference_mw != cell_sum) out.eq9_exact = false;
    }
  });
  for (int ep = 0; ep < episodes; ++ep) {
    const EpisodeResult res = runner.run_episode(ep, PolicyMode::kRandom);
    out.rows.insert(out.rows.end(), res.rows.begin(), res.rows.end());
  }
  return out;
}

LoggedRun& shared_logged_run() {
  static LoggedRun run = logged_random_run(100);
  return run;
}

bool criterion3_reward_identity(std::string& detail) {
  const LoggedRun& run = shared_logged_run();
  double worst = 0.0;
  const RewardConstants rc;
  for (const MetricsRow& r : run.rows) {
    const double recomputed =
        (r.gamma_se - rc.gamma_target) - rc.alpha * r.interf_cost - std::fabs(r.prb_util - rc.wp);
    worst = std::max(worst, std::fabs(recomputed - r.reward));
  }
  // Worked anchors with the 2.5 / 0.7 / 0.85 constants.
  RewardBreakdown rb;
  rb.gamma_se = 2.5;
  rb.interf_cost = 0.0;
  rb.prb_util = 0.85;
  const bool anchors = rb.recompute() == 0.0 &&
                       [&] {
                         rb.gamma_se = 3.5;
                         rb.interf_cost = 0.5;
                         return rb.recompute() == 0.65;
                       }() &&
                       [&] {
                         rb.gamma_se = 2.0;
                         rb.interf_cost = 1.0;
                         rb.prb_util = 1.0;
                         return rb.recompute() == -1.35;
                       }();
  std::ostringstream os;
  os << run.rows.size() << " rows, max |identity error| = " << worst
     << (anchors ? ", anchors 0 / 0.65 / -1.35 exact" : ", anchor mismatch");
  detail = os.str();
  return worst < 1e-12 && anchors;
}

bool criterion4_interference_aggregation(std::string& detail) {
  const LoggedRun& run = shared_logged_run();
  std::ostringstream os;
  os << "exact sums on " << run.ttis_checked << " TTIs of a 100-episode run";
  detail = os.str();
  return run.eq9_exact && run.ttis_checked == 1000;
}

bool criterion5_gradient_check(std::string& detail) {
  Timer timer;
  double global_worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    KeyedRng rng(4000 + static_cast<std::uint64_t>(pair));
    PolicyValueNet net(6, {3, 4, 5}, 5000 + static_cast<std::uint64_t>(pair), {8, 8});
    A2cConfig cfg;
    A2cUpdater updater(net, cfg);
    const int batch_size = 1 + static_cast<int>(rng.next_below(4));
    std::vector<UpdateSample> batch(static_cast<size_t>(batch_size));
    for (UpdateSample& s : batch) {
      s.state.resize(6);
      for (double& v : s.state) v = rng.next_unit();
      for (int k : net.head_sizes()) {
        s.actions.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k))));
      }
      s.ret = rng.next_gaussian();
      s.advantage = rng.next_gaussian();
    }
    std::vector<double> grads;
    updater.compute_loss_and_grads(batch, grads);
    const double eps = 1e-5;
    for (size_t i = 0; i < net.num_params(); ++i) {
      const double keep = net.params()[i];
      net.params()[i] = keep + eps;
      const double up = updater.loss_only(batch);
      net.params()[i] = keep - eps;
      const double down = updater.loss_only(batch);
      net.params()[i] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      // relative error with 1e-7 absolute floor
      const double err = std::fabs(numeric - grads[i]) /
                         std::max(std::max(std::fabs(numeric), std::fabs(grads[i])), 1e-3);
      global_worst = std::max(global_worst, err);
    }
  }
  const double secs = timer.seconds();
  std::ostringstream os;
  os << "100 net/batch pairs, max relative error = " << global_worst << ", " << secs << " s";
  detail = os.str();
  return global_worst < 1e-4 && secs < 60.0;
}

bool criterion6_determinism(std::string& detail) {
  ExperimentConfig cfg = desk_config();
  cfg.episodes = 2;
  cfg.out_dir = "acceptance_out/det_a";
  run_experiment(cfg);
  cfg.out_dir = "acceptance_out/det_b";
  run_experiment(cfg);
  const bool identical = slurp("acceptance_out/det_a/metrics.csv") ==
                         slurp("acceptance_out/det_b/metrics.csv");

  // Compare mode: common random numbers across the three agents.
  ExperimentConfig cmp = desk_config();
  cmp.episodes = 2;
  cmp.out_dir = "acceptance_out/cmp";
  bool crn = true;
  try {
    compare(cmp, "", "");  // compare() itself refuses on hash mismatch
  } catch (const std::exception&) {
    crn = false;
  }
  std::ostringstream os;
  os << (identical ? "metrics.csv byte-identical across runs" : "metrics.csv differs")
     << (crn ? "; channel hashes equal across agents" : "; channel hash mismatch");
  detail = os.str();
  return identical && crn;
}

struct TrainOutcome {
  std::vector<double> rewards;
  fs::path checkpoint;
};

TrainOutcome train_agent(AgentKind agent, std::uint64_t seed, int episodes,
                         const std::string& tag) {
  ExperimentConfig cfg = desk_config();
  cfg.agent = agent;
  cfg.episodes = episodes;
  cfg.scenario.seed = seed;
  cfg.out_dir = "acceptance_out/train_" + tag;
  const TrainResult tr = train(cfg);
  return {tr.episode_rewards, tr.checkpoint_path};
}

std::vector<double> random_policy_rewards(std::uint64_t seed, int episodes) {
  ExperimentConfig cfg = desk_config();
  cfg.agent = AgentKind::kRandom;
  cfg.scenario.seed = seed;
  cfg.episodes = episodes;
  ExperimentRunner runner(cfg, /*hash_channels=*/false);
  std::vector<double> rewards;
  rewards.reserve(static_cast<size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    rewards.push_back(runner.run_episode(ep, PolicyMode::kRandom).mean_reward);
  }
  return rewards;
}

constexpr int kTrainEpisodes = 2000;
constexpr std::uint64_t kSeeds[3] = {1, 2, 3};

struct HeavyState {
  TrainOutcome inter[3];
  TrainOutcome plain[3];
  std::vector<double> random_rewards[3];
  bool ready = false;
};

HeavyState& heavy_state() {
  static HeavyState st;
  if (!st.ready) {
    std::vector<std::thread> workers;
    for (int i = 0; i < 3; ++i) {
      workers.emplace_back([&st, i] {
        st.inter[i] = train_agent(AgentKind::kInterA2c, kSeeds[i], kTrainEpisodes,
                                  "inter_s" + std::to_string(kSeeds[i]));
      });
      workers.emplace_back([&st, i] {
        st.plain[i] = train_agent(AgentKind::kA2c, kSeeds[i], kTrainEpisodes,
                                  "a2c_s" + std::to_string(kSeeds[i]));
      });
      workers.emplace_back([&st, i] {
        st.random_rewards[i] = random_policy_rewards(kSeeds[i], 200);
      });
    }
    for (auto& w : workers) w.join();
    st.ready = true;
  }
  return st;
}

bool criterion7_training_progress(std::string& detail) {
  const HeavyState& st = heavy_state();
  const int decile = kTrainEpisodes / 10;
  bool improved_every_seed = true;
  std::vector<double> final_pool, random_pool;
  std::ostringstream os;
  for (int i = 0; i < 3; ++i) {
    const std::vector<double>& r = st.inter[i].rewards;
    const double first = mean(std::span(r.data(), static_cast<size_t>(decile)));
    const double last =
        mean(std::span(r.data() + r.size() - decile, static_cast<size_t>(decile)));
    os << "seed " << kSeeds[i] << ": " << first << " -> " << last << "; ";
    if (!(last > first)) improved_every_seed = false;
    final_pool.insert(final_pool.end(), r.end() - decile, r.end());
    random_pool.insert(random_pool.end(), st.random_rewards[i].begin(),
                       st.random_rewards[i].end());
  }
  const WelchResult w = welch_t_test(final_pool, random_pool);
  const bool beats_random = mean(final_pool) > mean(random_pool) && w.p_two_sided < 0.05;
  os << "vs random: " << mean(final_pool) << " vs " << mean(random_pool)
     << " (p = " << w.p_two_sided << ")";
  detail = os.str();
  return improved_every_seed && beats_random;
}

bool criterion8_directional_reproduction(std::string& detail) {
  const HeavyState& st = heavy_state();
  double se[3] = {0, 0, 0}, thr[3] = {0, 0, 0}, interference[3] = {0, 0, 0};
  // Index 0 = follow_pmi, 1 = a2c, 2 = inter_a2c.
  for (int i = 0; i < 3; ++i) {
    ExperimentConfig cfg = desk_config();
    cfg.scenario.seed = kSeeds[i];
    cfg.episodes = 200;
    std::uint64_t hash[3] = {0, 0, 0};
    for (int a = 0; a < 3; ++a) {
      cfg.agent = a == 0 ? AgentKind::kFollowPmi : a == 1 ? AgentKind::kA2c
                                                          : AgentKind::kInterA2c;
      cfg.checkpoint = a == 0 ? ""
                       : a == 1 ? st.plain[i].checkpoint.string()
                                : st.inter[i].checkpoint.string();
      const EvalResult ev = evaluate(cfg, /*write_files=*/false);
      se[a] += ev.mean_se / 3.0;
      thr[a] += ev.mean_thr_mbps / 3.0;
      interference[a] += ev.mean_interference_mw / 3.0;
      hash[a] = ev.channel_hash;
    }
    if (hash[0] != hash[1] || hash[0] != hash[2]) {
      detail = "channel hash mismatch across agents";
      return false;
    }
  }
  const bool se_trend = se[2] >= se[0];
  const bool interf_trend = interference[2] <= interference[0];
  const bool thr_trend = thr[0] < thr[1] && thr[0] < thr[2];
  std::ostringstream os;
  os.precision(6);
  os << "SE " << se[0] << "/" << se[1] << "/" << se[2] << " (d=" << se[2] - se[0] << "), "
     << "thr " << thr[0] << "/" << thr[1] << "/" << thr[2] << " Mbit/s, "
     << "I " << interference[0] << "/" << interference[1] << "/" << interference[2]
     << " mW (d=" << interference[2] - interference[0] << ") [follow/a2c/inter]";
  detail = os.str();
  return se_trend && interf_trend && thr_trend;
}

bool criterion9_bus_contract(std::string& detail) {
  // 1e4 generated messages round-trip bit-exactly.
  KeyedRng rng(31337);
  int exact = 0;
  const int n_msgs = 10000;
  for (int i = 0; i < n_msgs; ++i) {
    BusMessage m;
    if (rng.next_unit() < 0.5) {
      const int pci = static_cast<int>(rng.next_below(57));
      const int ue = static_cast<int>(rng.next_below(570));
      m.subject = "csi.cell." + std::to_string(pci) + ".ue." + std::to_string(ue);
      json pmi = json::array(), cqi = json::array(), interf = json::array();
      for (int k = 0; k < 6; ++k) {
        pmi.push_back(static_cast<int>(rng.next_below(64)));
        cqi.push_back(static_cast<int>(rng.next_below(16)));
        interf.push_back(std::pow(10.0, -12.0 + 6.0 * rng.next_unit()));
      }
      m.payload = json{{"ue", ue},       {"pci", pci},       {"tti", i},
                       {"ri", 1 + static_cast<int>(rng.next_below(2))},
                       {"pmi", pmi},     {"cqi", cqi},       {"wb_cqi", 7},
                       {"rsrp_dbm", -120.0 + 60.0 * rng.next_unit()},
                       {"thr_mbps", 10.0 * rng.next_unit()}, {"interf_mw", interf}};
    } else {
      const int pci = static_cast<int>(rng.next_below(57));
      m.subject = "ctrl.cell." + std::to_string(pci);
      json assignments = json::array();
      const int n_assign = 1 + static_cast<int>(rng.next_below(5));
      for (int k = 0; k < n_assign; ++k) {
        assignments.push_back(json{{"ue", static_cast<int>(rng.next_below(570))},
                                   {"ri", 1 + static_cast<int>(rng.next_below(2))},
                                   {"pmi", static_cast<int>(rng.next_below(128))},
                                   {"subbands", "all"}});
      }
      m.payload = json{{"pci", pci}, {"tti", i}, {"agent", "inter_a2c"},
                       {"assignments", assignments}};
    }
    m.tti = i;
    const std::string line = encode(m);
    if (encode(decode(line)) == line) ++exact;
  }

  // Per-subject FIFO under 4 concurrent publishers.
  Bus bus;
  MessageQueue q(bus, "ctrl.>");
  std::vector<std::thread> pubs;
  for (int p = 0; p < 4; ++p) {
    pubs.emplace_back([&bus, p] {
      for (int i = 0; i < 1000; ++i) {
        BusMessage m;
        m.subject = "ctrl.cell." + std::to_string(p);
        m.tti = i;
        m.payload = json{{"pci", p}, {"tti", i}, {"agent", "t"},
                         {"assignments", json::array()}};
        bus.publish(m);
      }
    });
  }
  for (auto& t : pubs) t.join();
  bool fifo = true;
  long long next[4] = {0, 0, 0, 0};
  const auto got = q.drain();
  for (const BusMessage& m : got) {
    const int p = std::stoi(std::string(split_subject(m.subject)[2]));
    if (m.tti != next[p]) fifo = false;
    ++next[p];
  }
  fifo = fifo && got.size() == 4000u;

  // TCP loopback subscriber during a 10-TTI run.
  ExperimentConfig cfg = desk_config();
  cfg.episodes = 1;
  cfg.bus_tcp_addr = "127.0.0.1:0";
  ExperimentRunner runner(cfg, /*hash_channels=*/false);
  const std::string addr = "127.0.0.1:" + std::to_string(runner.tcp_server()->port());
  TcpBusClient client(addr, "csi.>");
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  runner.run_episode(0, PolicyMode::kFollow);
  const size_t expected = static_cast<size_t>(cfg.scenario.num_ues()) * 10u;
  std::vector<BusMessage> received;
  for (int waited = 0; waited < 100 && received.size() < expected; ++waited) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    for (BusMessage& m : client.drain()) received.push_back(std::move(m));
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  for (BusMessage& m : client.drain()) received.push_back(std::move(m));
  client.close();

  std::ostringstream os;
  os << exact << "/" << n_msgs << " bit-exact round trips; FIFO "
     << (fifo ? "preserved" : "violated") << " under 4 publishers; TCP subscriber got "
     << received.size() << "/" << expected << " messages";
  detail = os.str();
  return exact == n_msgs && fifo && received.size() == expected;
}

bool criterion10_cqi_mapping(std::string& detail) {
  bool floor_ok = true;
  for (int i = 0; i < 1000; ++i) {
    const double sinr = std::pow(10.0, -3.0 + 6.0 * i / 999.0);
    const int cqi = sinr_to_cqi(sinr);
    if (cqi_to_se(cqi) > std::log2(1.0 + sinr)) floor_ok = false;
  }
  const bool top = cqi_to_se(15) == 5.5547;
  std::ostringstream os;
  os << "floor property over 1000-point sweep " << (floor_ok ? "holds" : "violated")
     << "; CQI 15 SE = " << cqi_to_se(15);
  detail = os.str();
  return floor_ok && top;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.push_back(std::stoi(tok));
    }
  }
  struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "codebook validity", criterion1_codebook},
      {2, "follow-PMI oracle equivalence", criterion2_follow_pmi_oracle},
      {3, "reward identity and anchors", criterion3_reward_identity},
      {4, "interference aggregation", criterion4_interference_aggregation},
      {5, "gradient check", criterion5_gradient_check},
      {6, "determinism and common random numbers", criterion6_determinism},
      {7, "training progress", criterion7_training_progress},
      {8, "directional reproduction", criterion8_directional_reproduction},
      {9, "bus contract", criterion9_bus_contract},
      {10, "CQI mapping", criterion10_cqi_mapping},
  };
  fs::create_directories("acceptance_out");
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    std::string detail;
    bool ok = false;
    Timer timer;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (ok ? "PASS" : "FAIL")
              << " [" << static_cast<long long>(timer.seconds()) << " s] " << detail << "\n"
              << std::flush;
    if (!ok) ++failures;
  }
  return failures;
}
