#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedsched/harness.hpp"

namespace {

void print_summaries(const fedsched::ExperimentResult& result) {
  for (const fedsched::TrialSummary& s : result.summaries) {
    std::printf("trial %d: policy=%s rounds=%d best_accuracy=%.4f mean_n=%.2f\n",
                s.trial, s.policy.c_str(), s.rounds_completed, s.best_accuracy,
                s.mean_n_scheduled);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency-budgeted federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string policy;
  int trials = 0;

  CLI::App* run = app.add_subcommand("run", "Run one experiment and write CSVs");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "override master_seed");
  CLI::Option* policy_opt = run->add_option("--policy", policy, "override policy");
  CLI::Option* trials_opt = run->add_option("--trials", trials, "override trial count");

  std::string sweep_key;
  std::vector<std::string> sweep_values;
  CLI::App* sweep = app.add_subcommand("sweep", "Re-run the experiment over a key");
  sweep->add_option("--config", config_path, "experiment config file")->required();
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep->add_option("--key", sweep_key, "config key to sweep")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")
      ->required()
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    fedsched::ExperimentConfig cfg = fedsched::parse_config_file(config_path);
    if (*seed_opt) cfg.master_seed = seed;
    if (*policy_opt) cfg.policy = policy;
    if (*trials_opt) {
      if (trials < 1) throw fedsched::ConfigError("--trials must be >= 1");
      cfg.trials = trials;
    }

    if (run->parsed()) {
      fedsched::parse_policy(cfg.policy, cfg.policy_n, cfg.policy_threshold_s);
      const fedsched::ExperimentResult result = fedsched::run_and_write(cfg, out_dir);
      print_summaries(result);
      std::printf("wrote %s/history.csv and %s/summary.csv\n", out_dir.c_str(),
                  out_dir.c_str());
    } else {
      fedsched::sweep_and_write(cfg, sweep_key, sweep_values, out_dir);
      std::printf("wrote %s/sweep.csv (%zu values)\n", out_dir.c_str(),
                  sweep_values.size());
    }
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
