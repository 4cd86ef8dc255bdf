#include "fedsched/bound.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsched {
namespace {

void check_curvature(double beta, double eta, int steps) {
  if (!(beta > 0.0)) throw std::domain_error("bound: beta must be > 0");
  if (!(eta > 0.0)) throw std::domain_error("bound: eta must be > 0");
  if (steps < 0) throw std::domain_error("bound: steps must be >= 0");
}

// (1 + z)^steps - 1 for z = eta*beta. The incremental form keeps small-step
// values exact: one step yields exactly z, so drift_excess(1) cancels to
// zero instead of leaving a rounding residue. Large exponents switch to log
// space to avoid overflow before the final exp.
double growth_minus_one(double z, int steps) {
  if (steps == 0) return 0.0;
  if (steps > 64) return std::expm1(static_cast<double>(steps) * std::log1p(z));
  double acc = z;
  for (int j = 2; j <= steps; ++j) acc = acc * (1.0 + z) + z;
  return acc;
}

}  // namespace

BoundParams finalize_bound_params(BoundParams p) {
  if (p.delta_i.size() == 0 || p.delta_i.size() != p.dataset_sizes.size()) {
    throw std::domain_error("bound: delta_i and dataset_sizes must match and be nonempty");
  }
  if (p.dataset_sizes.minCoeff() <= 0.0) {
    throw std::domain_error("bound: dataset sizes must be > 0");
  }
  p.total_dataset = p.dataset_sizes.sum();
  p.min_dataset = p.dataset_sizes.minCoeff();
  p.delta = p.dataset_sizes.dot(p.delta_i) / p.total_dataset;
  return p;
}

double drift_bound(double delta, double beta, double eta, int steps) {
  check_curvature(beta, eta, steps);
  if (delta < 0.0) throw std::domain_error("bound: delta must be >= 0");
  return delta / beta * growth_minus_one(eta * beta, steps);
}

double drift_excess(double delta, double beta, double eta, int steps) {
  check_curvature(beta, eta, steps);
  if (delta < 0.0) throw std::domain_error("bound: delta must be >= 0");
  const double z = eta * beta;
  // Factored as (delta/beta) * ((1+z)^steps - 1 - z*steps): the bracket is
  // a difference of identical doubles at steps = 1, hence exactly zero.
  return delta / beta * (growth_minus_one(z, steps) - z * static_cast<double>(steps));
}

double participation_gap(int n_scheduled, const BoundParams& p) {
  const int m = static_cast<int>(p.delta_i.size());
  if (n_scheduled < 1 || n_scheduled > m) {
    throw std::domain_error("participation_gap: need 1 <= n <= M");
  }
  if (n_scheduled == m) return 0.0;
  if (m < 2) throw std::domain_error("participation_gap: need M >= 2 when n < M");

  Eigen::VectorXd g(m);
  for (int i = 0; i < m; ++i) {
    g[i] = drift_bound(p.delta_i[i], p.beta, p.eta, p.tau);
  }
  // sum_ij Di^2 Dj^2 (g_i^2 + g_j^2) = 2 * sum_j Dj^2 * sum_i Di^2 g_i^2.
  const Eigen::ArrayXd d_sq = p.dataset_sizes.array().square();
  const double pair_sum = 2.0 * d_sq.sum() * (d_sq * g.array().square()).sum();
  const double denom = 2.0 * m * (m - 1.0) * p.min_dataset * p.min_dataset *
                       p.total_dataset * p.total_dataset;
  const double a = p.beta * pair_sum / denom;
  return (static_cast<double>(m) - n_scheduled) / n_scheduled * a;
}

double loss_floor(std::int64_t rounds, double gap, const BoundParams& p) {
  if (rounds < 1) throw std::domain_error("loss_floor: rounds must be >= 1");
  if (!(p.phi > 0.0)) throw std::domain_error("loss_floor: phi must be > 0");
  if (gap < 0.0) throw std::domain_error("loss_floor: gap must be >= 0");
  const double k = static_cast<double>(rounds);
  const double per_round = p.rho * drift_excess(p.delta, p.beta, p.eta, p.tau) + gap;
  const double denom = 2.0 * p.eta * p.phi * k * p.tau;
  return (1.0 + std::sqrt(1.0 + 2.0 * denom * k * per_round)) / denom;
}

double myopic_objective(std::int64_t k_hat, int n_scheduled, const BoundParams& p) {
  const double gap = participation_gap(n_scheduled, p);
  return loss_floor(k_hat, gap, p) +
         p.rho * drift_excess(p.delta, p.beta, p.eta, p.tau) + gap;
}

}  // namespace fedsched
