#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsched/datagen.hpp"
#include "fedsched/fltrain.hpp"

namespace fedsched {

// One experiment, as read from a flat "key = value" file. Defaults describe
// a 20-device, 600 m cell with one uniform device class; see
// parse_config_text for the full key list.
struct ExperimentConfig {
  int devices = 20;
  double radius_m = 600.0;
  double min_dist_m = 1.0;
  double path_loss_exp = 3.76;
  double bandwidth_hz = 20e6;
  double noise_dbm_per_mhz = -114.0;
  double tx_power_dbm = 10.0;
  double upload_bits = 0.0;  // 0 = 32 bits per model parameter
  double time_budget_s = 60.0;
  int tau = 5;
  double eta = 0.01;
  int batch_size = 128;
  double phi = 0.05;
  double epsilon_alloc = 1e-4;
  double shift_ms_per_sample = 0.5;
  double fluct_rate_per_ms = 0.0;  // 0 = 1 / shift_ms_per_sample
  bool fading = false;
  double error_rel_std = 0.0;
  bool remaining_budget_k_hat = false;
  int max_rounds = 0;

  std::string model = "mlp";  // mlp | logistic | linreg | svm
  int mlp_hidden = 64;
  double svm_lambda = 0.01;

  std::string data = "synth_classification";  // or synth_regression | idx
  int data_n = 2000;
  int data_dims = 20;
  int data_classes = 10;
  double data_spread = 2.5;
  double data_noise_std = 0.1;
  int test_n = 1000;
  std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;

  std::string partition_kind = "shards";  // iid | shards
  int shards_per_device = 1;

  std::string policy = "fc";
  int policy_n = 3;
  double policy_threshold_s = 0.4;

  int trials = 5;
  std::uint64_t master_seed = 1;
};

ExperimentConfig parse_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text);

// Independent deterministic generator per (seed, trial, component). The six
// components keep randomness compartmentalized so that, say, extra SGD
// draws never shift device placement.
enum class SeedComponent { Placement, Channel, Compute, Data, Policy, Sgd };
Rng seed_stream(std::uint64_t master_seed, int trial, SeedComponent component);

// RFC 4180 field quoting: fields containing comma, quote or newline are
// wrapped in double quotes with inner quotes doubled.
std::string csv_field(const std::string& raw);

struct TrialSummary {
  int trial = 0;
  std::string policy;
  double best_accuracy = 0.0;
  double best_loss = 0.0;
  int rounds_completed = 0;
  double mean_n_scheduled = 0.0;
  double mean_t_star_s = 0.0;
};

struct ExperimentResult {
  std::vector<std::vector<RoundRecord>> trial_rounds;
  std::vector<TrialSummary> summaries;
};

// Runs all trials (in parallel up to FEDSCHED_THREADS) and returns their
// histories. Pure compute, no files.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// run_experiment plus history.csv and summary.csv under out_dir.
ExperimentResult run_and_write(const ExperimentConfig& cfg,
                               const std::filesystem::path& out_dir);

// Re-runs the experiment once per value of the swept key and writes
// sweep.csv (plus per-value history/summary in subdirectories). Swept keys:
// phi, R_m, policy, error_rel_std, fixed_n.
void sweep_and_write(const ExperimentConfig& base, const std::string& key,
                     const std::vector<std::string>& values,
                     const std::filesystem::path& out_dir);

// The per-trial setup run_experiment builds internally; exposed for tests
// that need to drive run_training directly from a config.
TrainSetup build_setup(const ExperimentConfig& cfg, int trial);
PolicySpec parse_policy(const std::string& name, int n, double threshold_s);

}  // namespace fedsched
