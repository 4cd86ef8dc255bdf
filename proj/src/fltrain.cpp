#include "fedsched/fltrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fedsched/allocator.hpp"

namespace fedsched {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd batch_gradient(const ModelSpec& model, const Eigen::VectorXd& w,
                               const Dataset& data, std::vector<int>& scratch,
                               int batch_size, Rng& rng) {
  const int n = static_cast<int>(data.size());
  if (batch_size >= n) return model_gradient(model, w, data.features, data.labels);
  for (int j = 0; j < batch_size; ++j) {
    std::uniform_int_distribution<int> pick(j, n - 1);
    std::swap(scratch[j], scratch[pick(rng)]);
  }
  Eigen::MatrixXd bx(batch_size, data.features.cols());
  Eigen::VectorXd by(batch_size);
  for (int j = 0; j < batch_size; ++j) {
    bx.row(j) = data.features.row(scratch[j]);
    by[j] = data.labels[scratch[j]];
  }
  return model_gradient(model, w, bx, by);
}

}  // namespace

Eigen::VectorXd local_update(const Eigen::VectorXd& w0, const Dataset& data,
                             const ModelSpec& model, double eta, int tau,
                             int batch_size, Rng& rng) {
  if (data.size() == 0) throw std::domain_error("local_update: empty dataset");
  if (tau < 1 || batch_size < 1) {
    throw std::domain_error("local_update: need tau >= 1 and batch_size >= 1");
  }
  std::vector<int> scratch(data.size());
  std::iota(scratch.begin(), scratch.end(), 0);
  Eigen::VectorXd w = w0;
  for (int step = 0; step < tau; ++step) {
    w -= eta * batch_gradient(model, w, data, scratch, batch_size, rng);
  }
  return w;
}

Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& locals,
                          const Eigen::VectorXd& weights) {
  if (locals.empty() || weights.size() != static_cast<Eigen::Index>(locals.size())) {
    throw std::domain_error("aggregate: model/weight count mismatch");
  }
  if (weights.minCoeff() <= 0.0) throw std::domain_error("aggregate: weights must be > 0");
  Eigen::VectorXd acc = weights[0] * locals[0];
  for (std::size_t i = 1; i < locals.size(); ++i) {
    acc += weights[static_cast<Eigen::Index>(i)] * locals[i];
  }
  return acc / weights.sum();
}

std::optional<std::pair<double, double>> estimate_rho_beta(
    const Eigen::VectorXd& w_prev, const Eigen::VectorXd& w_new,
    const ModelSpec& model, const Dataset& data) {
  const double dist = (w_prev - w_new).norm();
  if (dist < 1e-12) return std::nullopt;
  const double rho = std::abs(model_loss(model, w_prev, data.features, data.labels) -
                              model_loss(model, w_new, data.features, data.labels)) /
                     dist;
  const double beta = (model_gradient(model, w_prev, data.features, data.labels) -
                       model_gradient(model, w_new, data.features, data.labels))
                          .norm() /
                      dist;
  return std::make_pair(rho, beta);
}

Eigen::VectorXd server_grad_estimate(const Eigen::VectorXd& w_prev,
                                     const Eigen::VectorXd& w_new, int tau,
                                     double eta) {
  if (tau < 1 || !(eta > 0.0)) {
    throw std::domain_error("server_grad_estimate: need tau >= 1 and eta > 0");
  }
  return (w_prev - w_new) / (static_cast<double>(tau) * eta);
}

std::vector<double> update_delta(const std::vector<Eigen::VectorXd>& grad_estimates,
                                 const Eigen::VectorXd& weights) {
  const Eigen::VectorXd mean = aggregate(grad_estimates, weights);
  std::vector<double> out;
  out.reserve(grad_estimates.size());
  for (const auto& g : grad_estimates) out.push_back((g - mean).norm());
  return out;
}

BoundParams make_bound_params(const EstimatorState& est,
                              const Eigen::VectorXd& dataset_sizes, double eta,
                              int tau, double phi, double beta_floor) {
  BoundParams p;
  const double total = dataset_sizes.sum();
  p.rho = dataset_sizes.dot(est.rho_i) / total;
  p.beta = std::max(dataset_sizes.dot(est.beta_i) / total, beta_floor);
  p.eta = eta;
  p.tau = tau;
  p.phi = phi;
  p.delta_i = est.delta_i;
  p.dataset_sizes = dataset_sizes;
  return finalize_bound_params(std::move(p));
}

TrainingResult run_training(const TrainSetup& setup, RngBundle& rngs) {
  const int m = static_cast<int>(setup.devices.size());
  if (m == 0 || static_cast<int>(setup.locals.size()) != m) {
    throw std::domain_error("run_training: device/dataset count mismatch");
  }

  Eigen::VectorXd dataset_sizes(m);
  for (int i = 0; i < m; ++i) {
    dataset_sizes[i] = static_cast<double>(setup.locals[i].size());
    if (setup.locals[i].size() == 0) {
      throw std::domain_error("run_training: device " + std::to_string(i) +
                              " has no data");
    }
  }

  TrainingResult res;
  Eigen::VectorXd w = init_params(setup.model, rngs.sgd);
  res.best_model = w;
  res.best_loss = std::numeric_limits<double>::infinity();
  EstimatorState est(m, setup.rho_prior, setup.beta_prior, setup.delta_prior);

  for (int k = 1; setup.max_rounds == 0 || k <= setup.max_rounds; ++k) {
    const BoundParams bound = make_bound_params(est, dataset_sizes, setup.eta,
                                                setup.tau, setup.phi, setup.beta_floor);
    RoundSampling sampling = setup.sampling;
    sampling.local_steps = setup.tau;
    const RoundState rs = sample_round(k, setup.devices, sampling, rngs.placement,
                                       rngs.channel, rngs.compute);
    const double budget = setup.remaining_budget_k_hat
                              ? setup.time_budget_s - res.elapsed_s
                              : setup.time_budget_s;
    const ScheduleContext ctx{rs,    setup.devices, setup.radio,
                              bound, budget,        setup.epsilon_alloc};
    const ScheduleDecision dec = schedule(setup.policy, ctx, rngs.policy);

    const double t_round = realized_round_latency(dec.ids, dec.allocation.gamma, rs,
                                                  setup.devices, setup.radio);
    if (res.elapsed_s + t_round > setup.time_budget_s) break;
    res.elapsed_s += t_round;

    // Local updates in ascending device id, whatever order the policy
    // reported, so the RNG stream layout is policy-independent.
    std::vector<int> order = dec.ids;
    std::sort(order.begin(), order.end());
    const Eigen::VectorXd w_prev = w;
    std::vector<Eigen::VectorXd> locals, grads;
    Eigen::VectorXd weights(static_cast<Eigen::Index>(order.size()));
    double sched_loss = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) {
      const int i = order[j];
      const Dataset& data = setup.locals[i];
      Eigen::VectorXd wi =
          local_update(w_prev, data, setup.model, setup.eta, setup.tau,
                       std::min<int>(setup.devices[i].batch_size,
                                     static_cast<int>(data.size())),
                       rngs.sgd);
      if (const auto rb = estimate_rho_beta(w_prev, wi, setup.model, data)) {
        est.rho_i[i] = rb->first;
        est.beta_i[i] = rb->second;
      }
      grads.push_back(server_grad_estimate(w_prev, wi, setup.tau, setup.eta));
      sched_loss += dataset_sizes[i] *
                    model_loss(setup.model, w_prev, data.features, data.labels);
      weights[static_cast<Eigen::Index>(j)] = dataset_sizes[i];
      locals.push_back(std::move(wi));
    }
    sched_loss /= weights.sum();
    w = aggregate(locals, weights);

    const std::vector<double> deltas = update_delta(grads, weights);
    for (std::size_t j = 0; j < order.size(); ++j) est.delta_i[order[j]] = deltas[j];

    if (sched_loss < res.best_loss) {
      res.best_loss = sched_loss;
      res.best_model = w_prev;
    }

    RoundRecord rec;
    rec.round = k;
    rec.n_scheduled = static_cast<int>(order.size());
    rec.scheduled = order;
    rec.t_star_s = t_round;
    rec.cumulative_s = res.elapsed_s;
    rec.k_hat = dec.k_hat;
    rec.c_value = dec.c_value.value_or(kNan);
    rec.global_loss = sched_loss;
    rec.true_global_loss = model_loss(setup.model, w, setup.pooled_train.features,
                                      setup.pooled_train.labels);
    rec.test_accuracy = setup.test.size() > 0
                            ? model_accuracy(setup.model, w, setup.test.features,
                                             setup.test.labels)
                            : kNan;
    rec.rho_hat = bound.rho;
    rec.beta_hat = bound.beta;
    rec.delta_hat = bound.delta;
    rec.budget_exhausted = dec.budget_exhausted;
    rec.threshold_violated = dec.threshold_violated;
    res.rounds.push_back(std::move(rec));
  }

  res.final_model = w;
  return res;
}

}  // namespace fedsched
