#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fedsched/datagen.hpp"
#include "fedsched/model.hpp"
#include "fedsched/scheduler.hpp"
#include "fedsched/wireless.hpp"

namespace fedsched {

// tau mini-batch SGD steps from w0 on one local dataset. Batches are drawn
// without replacement inside a step; batch_size >= data size degrades to
// full-batch gradient descent and consumes no randomness.
Eigen::VectorXd local_update(const Eigen::VectorXd& w0, const Dataset& data,
                             const ModelSpec& model, double eta, int tau,
                             int batch_size, Rng& rng);

// Dataset-size-weighted average of local models.
Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& locals,
                          const Eigen::VectorXd& weights);

// Secant estimates of the loss Lipschitz constant (|F(w_prev) - F(w_new)| /
// |w_prev - w_new|) and smoothness (gradient difference over the same
// denominator), both on the full local dataset. Empty when the update moved
// less than 1e-12, so stale estimates persist.
std::optional<std::pair<double, double>> estimate_rho_beta(
    const Eigen::VectorXd& w_prev, const Eigen::VectorXd& w_new,
    const ModelSpec& model, const Dataset& data);

// What the server can infer about a device's average local gradient from
// the model it uploaded: (w_prev - w_new) / (tau * eta). Exact for
// full-batch descent by telescoping.
Eigen::VectorXd server_grad_estimate(const Eigen::VectorXd& w_prev,
                                     const Eigen::VectorXd& w_new, int tau,
                                     double eta);

// Per-device divergence: distance of each gradient estimate from their
// weighted mean.
std::vector<double> update_delta(const std::vector<Eigen::VectorXd>& grad_estimates,
                                 const Eigen::VectorXd& weights);

// Latest per-device secant estimates; unscheduled devices keep their
// previous (initially prior) values.
struct EstimatorState {
  Eigen::VectorXd rho_i, beta_i, delta_i;

  EstimatorState(int device_count, double rho0, double beta0, double delta0)
      : rho_i(Eigen::VectorXd::Constant(device_count, rho0)),
        beta_i(Eigen::VectorXd::Constant(device_count, beta0)),
        delta_i(Eigen::VectorXd::Constant(device_count, delta0)) {}
};

// Data-weighted estimator means packed for the bound; beta is floored to
// keep the drift terms defined when estimation noise drives it to zero.
BoundParams make_bound_params(const EstimatorState& est,
                              const Eigen::VectorXd& dataset_sizes, double eta,
                              int tau, double phi, double beta_floor);

struct RoundRecord {
  int round = 0;
  int n_scheduled = 0;
  std::vector<int> scheduled;
  double t_star_s = 0.0;      // realized duration of this round
  double cumulative_s = 0.0;
  std::int64_t k_hat = 1;
  double c_value = 0.0;       // NaN for policies without an objective
  double global_loss = 0.0;   // scheduled-weighted loss of the broadcast model
  double true_global_loss = 0.0;  // pooled training loss of the new aggregate
  double test_accuracy = 0.0;
  double rho_hat = 0.0, beta_hat = 0.0, delta_hat = 0.0;
  bool budget_exhausted = false;
  bool threshold_violated = false;
};

struct TrainingResult {
  std::vector<RoundRecord> rounds;
  Eigen::VectorXd final_model;
  Eigen::VectorXd best_model;   // broadcast model with the lowest reported loss
  double best_loss = 0.0;
  double elapsed_s = 0.0;
};

struct TrainSetup {
  ModelSpec model;
  std::vector<DeviceProfile> devices;
  RadioConfig radio;
  RoundSampling sampling;
  std::vector<Dataset> locals;
  Dataset pooled_train;  // union of the locals, for the true loss column
  Dataset test;          // empty => accuracy NaN
  PolicySpec policy;
  double time_budget_s = 60.0;
  int tau = 5;
  double eta = 0.01;
  double phi = 0.05;
  double epsilon_alloc = 1e-4;
  int max_rounds = 0;  // 0 = until the time budget runs out
  bool remaining_budget_k_hat = false;
  double beta_floor = 1e-6;
  double rho_prior = 1.5, beta_prior = 12.0, delta_prior = 2.0;
};

struct RngBundle {
  Rng placement, channel, compute, sgd, policy;
};

// One federated run: schedule, clock the round, train locally, aggregate,
// refresh estimators; stops when the next round would cross the time budget
// (that round never executes) or max_rounds is hit.
TrainingResult run_training(const TrainSetup& setup, RngBundle& rngs);

}  // namespace fedsched
