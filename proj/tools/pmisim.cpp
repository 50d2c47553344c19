// Command-line front end: run / train / eval / compare / dump-codebook.
// Exit codes: 0 success, 2 configuration error, 3 runtime abort.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "pmisim/harness.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string agent;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> episodes;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_checkpoint) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--agent", f.agent, "follow_pmi | a2c | inter_a2c | random");
  cmd->add_option("--seed", f.seed, "scenario seed override");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--episodes", f.episodes, "episode count override");
  if (with_checkpoint) {
    cmd->add_option("--checkpoint", f.checkpoint, "policy checkpoint file");
  }
}

pmisim::ExperimentConfig make_config(const CommonFlags& f) {
  pmisim::ExperimentConfig cfg =
      f.config_path.empty() ? pmisim::ExperimentConfig{} : pmisim::load_config(f.config_path);
  if (!f.agent.empty()) cfg.agent = pmisim::agent_from_name(f.agent);
  if (f.seed) cfg.scenario.seed = *f.seed;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (f.episodes) cfg.episodes = *f.episodes;
  if (!f.checkpoint.empty()) cfg.checkpoint = f.checkpoint;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-cell downlink PMI control simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, train_flags, eval_flags, cmp_flags;
  std::string cmp_a2c_ckpt, cmp_inter_ckpt, dump_path;

  CLI::App* cmd_run = app.add_subcommand("run", "run episodes and write metrics.csv");
  add_common(cmd_run, run_flags, true);

  CLI::App* cmd_train = app.add_subcommand("train", "train an agent; writes reward_curve.csv "
                                                    "and checkpoint.json");
  add_common(cmd_train, train_flags, false);

  CLI::App* cmd_eval = app.add_subcommand("eval", "greedy evaluation with CDF/per-cell exports");
  add_common(cmd_eval, eval_flags, true);

  CLI::App* cmd_cmp = app.add_subcommand("compare", "evaluate the three policies on one "
                                                    "scenario with common random numbers");
  add_common(cmd_cmp, cmp_flags, false);
  cmd_cmp->add_option("--a2c-checkpoint", cmp_a2c_ckpt, "checkpoint for the plain policy");
  cmd_cmp->add_option("--inter-a2c-checkpoint", cmp_inter_ckpt,
                      "checkpoint for the interference-aware policy");

  CLI::App* cmd_dump = app.add_subcommand("dump-codebook", "write the precoder set as CSV");
  cmd_dump->add_option("--out", dump_path, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      const pmisim::ExperimentConfig cfg = make_config(run_flags);
      const pmisim::EvalResult ev = pmisim::run_experiment(cfg);
      std::cout << "wrote " << ev.rows.size() << " metric rows to " << cfg.out_dir
                << "/metrics.csv (channel hash " << ev.channel_hash << ")\n";
    } else if (cmd_train->parsed()) {
      const pmisim::ExperimentConfig cfg = make_config(train_flags);
      const pmisim::TrainResult tr = pmisim::train(cfg);
      std::cout << "trained " << tr.episode_rewards.size() << " episodes; checkpoint at "
                << tr.checkpoint_path.string() << "\n";
    } else if (cmd_eval->parsed()) {
      const pmisim::ExperimentConfig cfg = make_config(eval_flags);
      if ((cfg.agent == pmisim::AgentKind::kA2c || cfg.agent == pmisim::AgentKind::kInterA2c) &&
          cfg.checkpoint.empty()) {
        throw pmisim::config_error("eval requires --checkpoint for RL agents");
      }
      const pmisim::EvalResult ev = pmisim::evaluate(cfg);
      std::cout << "mean_se=" << ev.mean_se << " mean_thr_mbps=" << ev.mean_thr_mbps
                << " mean_prb_util=" << ev.mean_prb_util
                << " mean_interference_mw=" << ev.mean_interference_mw << "\n";
    } else if (cmd_cmp->parsed()) {
      const pmisim::ExperimentConfig cfg = make_config(cmp_flags);
      pmisim::compare(cfg, cmp_a2c_ckpt, cmp_inter_ckpt);
      std::cout << "wrote " << cfg.out_dir << "/comparison.csv\n";
    } else if (cmd_dump->parsed()) {
      const pmisim::Codebook cb;
      if (dump_path.empty()) {
        pmisim::dump_codebook_csv(cb, std::cout);
      } else {
        std::ofstream out(dump_path, std::ios::binary);
        pmisim::dump_codebook_csv(cb, out);
        std::cout << "wrote " << dump_path << "\n";
      }
    }
  } catch (const pmisim::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
