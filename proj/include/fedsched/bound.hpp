#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace fedsched {

// Smoothness/heterogeneity snapshot the scheduler plugs into the
// convergence bound. delta_i holds one divergence estimate per device,
// delta their data-weighted mean; beta is floored above zero by the
// estimator, never here.
struct BoundParams {
  double rho = 0.0;    // Lipschitz constant of the loss
  double beta = 0.0;   // smoothness constant, > 0
  double eta = 0.0;    // local learning rate
  int tau = 1;         // local steps per round
  double phi = 0.05;   // curvature-floor scalar in the loss-floor recursion
  Eigen::VectorXd delta_i;
  double delta = 0.0;
  Eigen::VectorXd dataset_sizes;  // D_i
  double min_dataset = 0.0;       // D_min
  double total_dataset = 0.0;     // D
};

// Weighted-mean fields (delta, min/total dataset sizes) filled in from
// delta_i and dataset_sizes.
BoundParams finalize_bound_params(BoundParams p);

// Worst-case distance between a device's local model and the centralized
// trajectory after `steps` local updates:
// (delta/beta) * ((eta*beta + 1)^steps - 1). Zero at steps = 0.
double drift_bound(double delta, double beta, double eta, int steps);

// drift_bound minus the first-order term eta*delta*steps; the part of the
// drift that actually hurts one aggregation interval. Identically zero at
// steps <= 1, grows with curvature afterwards.
double drift_excess(double delta, double beta, double eta, int steps);

// Aggregation penalty of scheduling only n of the M devices. Depends on the
// subset only through its size; exactly zero at n = M. The double sum runs
// over all device pairs, so heterogeneous delta_i weight it unevenly.
double participation_gap(int n_scheduled, const BoundParams& p);

// Asymptotic loss gap after k rounds with per-round penalty `gap`:
// positive root of phi*eta*tau*k*x^2 - x - k*(rho*drift_excess(tau) + gap).
// Satisfies 1/x = k*(eta*phi*tau - (rho*h + gap)/x^2).
double loss_floor(std::int64_t rounds, double gap, const BoundParams& p);

// Myopic score the greedy scheduler minimizes: loss_floor at the round
// budget k_hat plus the per-round penalty itself. rounds < 1 is a domain
// error; callers clamp and flag budget exhaustion instead.
double myopic_objective(std::int64_t k_hat, int n_scheduled, const BoundParams& p);

}  // namespace fedsched
