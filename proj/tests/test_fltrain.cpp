#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "fedsched/fltrain.hpp"

using namespace fedsched;

namespace {

ModelSpec linreg_spec(int dims) {
  ModelSpec spec;
  spec.kind = ModelKind::LinearRegression;
  spec.input_dim = dims;
  return spec;
}

Dataset random_regression(std::mt19937_64& rng, int n, int dims) {
  Eigen::VectorXd w(dims);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < dims; ++i) w[i] = unit(rng);
  return synth_regression(rng, n, dims, w, 0.1);
}

// F(w) = 0.5 |w|^2 exactly: d samples x_r = sqrt(d) e_r with zero targets.
Dataset quadratic_bowl(int dims) {
  Dataset d;
  d.features = std::sqrt(static_cast<double>(dims)) *
               Eigen::MatrixXd::Identity(dims, dims);
  d.labels = Eigen::VectorXd::Zero(dims);
  return d;
}

TrainSetup tiny_setup(int devices, double time_budget_s) {
  std::mt19937_64 rng(41);
  TrainSetup setup;
  setup.model = linreg_spec(5);
  Eigen::VectorXd w(5);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 5; ++i) w[i] = unit(rng);

  for (int i = 0; i < devices; ++i) {
    setup.locals.push_back(synth_regression(rng, 30, 5, w, 0.1));
    DeviceProfile dev;
    dev.id = i;
    dev.dataset_size = 30;
    dev.batch_size = 30;
    dev.shift_ms_per_sample = 0.1;
    dev.fluct_rate_per_ms = 10.0;
    dev.tx_power_w = 0.01;
    setup.devices.push_back(dev);
  }
  Eigen::Index rows = 0;
  for (const Dataset& d : setup.locals) rows += d.size();
  setup.pooled_train.features.resize(rows, 5);
  setup.pooled_train.labels.resize(rows);
  Eigen::Index at = 0;
  for (const Dataset& d : setup.locals) {
    setup.pooled_train.features.middleRows(at, d.size()) = d.features;
    setup.pooled_train.labels.segment(at, d.size()) = d.labels;
    at += d.size();
  }
  setup.radio.upload_bits = 5e4;
  setup.sampling.local_steps = 2;
  setup.tau = 2;
  setup.eta = 0.01;
  setup.time_budget_s = time_budget_s;
  setup.policy.kind = PolicySpec::Kind::FixedN;
  setup.policy.n = std::min(2, devices);
  return setup;
}

RngBundle seeded_bundle(unsigned base) {
  return RngBundle{Rng(base), Rng(base + 1), Rng(base + 2), Rng(base + 3),
                   Rng(base + 4)};
}

}  // namespace

TEST_CASE("zero learning rate leaves the model untouched") {
  std::mt19937_64 rng(1);
  const Dataset d = random_regression(rng, 50, 5);
  const Eigen::VectorXd w0 = Eigen::VectorXd::Ones(5);
  Rng sgd(2);
  CHECK(local_update(w0, d, linreg_spec(5), 0.0, 5, 16, sgd) == w0);
}

TEST_CASE("full batch, one step is plain gradient descent") {
  std::mt19937_64 rng(2);
  const Dataset d = random_regression(rng, 50, 5);
  const ModelSpec spec = linreg_spec(5);
  Eigen::VectorXd w0(5);
  w0 << 1, -2, 0.5, 0, 3;
  Rng sgd(3);
  const Eigen::VectorXd w1 = local_update(w0, d, spec, 0.05, 1, 50, sgd);
  const Eigen::VectorXd expect = w0 - 0.05 * model_gradient(spec, w0, d.features, d.labels);
  CHECK(w1.isApprox(expect, 1e-14));
}

TEST_CASE("full batch, several steps matches a hand-rolled loop") {
  std::mt19937_64 rng(3);
  const Dataset d = random_regression(rng, 50, 5);
  const ModelSpec spec = linreg_spec(5);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(5);
  Rng sgd(4);
  const Eigen::VectorXd got = local_update(w, d, spec, 0.02, 4, 999, sgd);
  for (int step = 0; step < 4; ++step) {
    w -= 0.02 * model_gradient(spec, w, d.features, d.labels);
  }
  CHECK(got.isApprox(w, 1e-13));
}

TEST_CASE("full batch consumes no randomness; mini-batches do") {
  std::mt19937_64 rng(4);
  const Dataset d = random_regression(rng, 50, 5);
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(5);
  Rng a(7), b(7);
  local_update(w0, d, linreg_spec(5), 0.01, 3, 50, a);
  CHECK(a() == b());

  Rng c(8), e(8);
  const Eigen::VectorXd m1 = local_update(w0, d, linreg_spec(5), 0.01, 3, 16, c);
  const Eigen::VectorXd m2 = local_update(w0, d, linreg_spec(5), 0.01, 3, 16, e);
  CHECK(m1 == m2);  // same stream, same batches
  Rng untouched(8);
  CHECK(c() != untouched());  // the stream advanced
  const Eigen::VectorXd m3 = local_update(w0, d, linreg_spec(5), 0.01, 3, 16, c);
  CHECK(m1 != m3);  // stream advanced, different batches
}

TEST_CASE("aggregate is the weighted mean and rejects bad weights") {
  std::vector<Eigen::VectorXd> locals{Eigen::Vector2d(1.0, 0.0),
                                      Eigen::Vector2d(0.0, 2.0)};
  Eigen::VectorXd weights(2);
  weights << 100, 300;
  const Eigen::VectorXd mixed = aggregate(locals, weights);
  CHECK(mixed.isApprox(Eigen::Vector2d(0.25, 1.5), 1e-15));
  weights << 0, 300;
  CHECK_THROWS_AS(aggregate(locals, weights), std::domain_error);
}

TEST_CASE("secant estimates are exact on a quadratic bowl") {
  const Dataset d = quadratic_bowl(4);
  const ModelSpec spec = linreg_spec(4);
  Eigen::VectorXd w1(4), w2(4);
  w1 << 1, 2, -1, 0.5;
  w2 << 0.3, 1.1, 0.0, -0.2;
  const auto est = estimate_rho_beta(w1, w2, spec, d);
  REQUIRE(est.has_value());
  const double rho_expect =
      std::abs(0.5 * w1.squaredNorm() - 0.5 * w2.squaredNorm()) / (w1 - w2).norm();
  CHECK(est->first == doctest::Approx(rho_expect).epsilon(1e-12));
  CHECK(est->second == doctest::Approx(1.0).epsilon(1e-12));  // grad F = w
  CHECK_FALSE(estimate_rho_beta(w1, w1, spec, d).has_value());
}

TEST_CASE("server gradient estimate telescopes full-batch descent") {
  std::mt19937_64 rng(5);
  const Dataset d = random_regression(rng, 60, 5);
  const ModelSpec spec = linreg_spec(5);
  const Eigen::VectorXd w0 = Eigen::VectorXd::Ones(5);
  Rng sgd(6);
  const int tau = 4;
  const double eta = 0.03;
  const Eigen::VectorXd w4 = local_update(w0, d, spec, eta, tau, 999, sgd);

  Eigen::VectorXd w = w0, grad_mean = Eigen::VectorXd::Zero(5);
  for (int step = 0; step < tau; ++step) {
    const Eigen::VectorXd g = model_gradient(spec, w, d.features, d.labels);
    grad_mean += g / tau;
    w -= eta * g;
  }
  CHECK(server_grad_estimate(w0, w4, tau, eta).isApprox(grad_mean, 1e-12));
}

TEST_CASE("divergence estimates measure distance from the weighted mean") {
  Eigen::VectorXd weights(2);
  weights << 50, 50;
  const Eigen::VectorXd g = Eigen::Vector3d(1.0, -2.0, 0.0);
  const auto sym = update_delta({g, -g}, weights);
  CHECK(sym[0] == doctest::Approx(g.norm()).epsilon(1e-14));
  CHECK(sym[1] == doctest::Approx(g.norm()).epsilon(1e-14));
  const auto flat = update_delta({g, g}, weights);
  CHECK(flat[0] == 0.0);
  CHECK(flat[1] == 0.0);

  Eigen::VectorXd uneven(2);
  uneven << 300, 100;
  const auto skew = update_delta({g, -g}, uneven);
  // Mean sits at g/2, so the heavy device is closer.
  CHECK(skew[0] == doctest::Approx((g - 0.5 * g).norm()).epsilon(1e-14));
  CHECK(skew[1] == doctest::Approx((-g - 0.5 * g).norm()).epsilon(1e-14));
}

TEST_CASE("make_bound_params aggregates and floors") {
  EstimatorState est(2, 0.0, 0.0, 0.0);
  est.rho_i << 1.0, 3.0;
  est.beta_i << 2.0, 4.0;
  est.delta_i << 5.0, 7.0;
  Eigen::VectorXd sizes(2);
  sizes << 100, 300;
  const BoundParams p = make_bound_params(est, sizes, 0.01, 5, 0.05, 1e-6);
  CHECK(p.rho == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(p.beta == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(p.delta == doctest::Approx(6.5).epsilon(1e-14));
  CHECK(p.eta == 0.01);
  CHECK(p.tau == 5);
  CHECK(p.phi == 0.05);
  CHECK(p.min_dataset == 100.0);
  CHECK(p.total_dataset == 400.0);

  EstimatorState zero(2, 1.0, 0.0, 1.0);
  const BoundParams floored = make_bound_params(zero, sizes, 0.01, 5, 0.05, 1e-6);
  CHECK(floored.beta == 1e-6);
}

TEST_CASE("training loop respects the budget and records coherently") {
  const TrainSetup setup = tiny_setup(3, 0.5);
  RngBundle rngs = seeded_bundle(100);
  const TrainingResult res = run_training(setup, rngs);
  REQUIRE(res.rounds.size() > 2);
  double prev_cum = 0.0;
  double best_seen = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < res.rounds.size(); ++i) {
    const RoundRecord& r = res.rounds[i];
    CHECK(r.round == static_cast<int>(i) + 1);
    CHECK(r.n_scheduled == 2);
    CHECK(r.scheduled.size() == 2);
    CHECK(r.t_star_s > 0.0);
    CHECK(r.cumulative_s == doctest::Approx(prev_cum + r.t_star_s).epsilon(1e-12));
    prev_cum = r.cumulative_s;
    CHECK(r.cumulative_s <= 0.5);
    CHECK(std::isnan(r.test_accuracy));  // no test set attached
    best_seen = std::min(best_seen, r.global_loss);
  }
  CHECK(res.elapsed_s == doctest::Approx(prev_cum).epsilon(1e-12));
  CHECK(res.best_loss == doctest::Approx(best_seen).epsilon(1e-12));
  CHECK(res.final_model.size() == 5);
  // The quadratic objective must actually improve over the run.
  CHECK(res.rounds.back().true_global_loss < res.rounds.front().true_global_loss);
}

TEST_CASE("a round that would overshoot the budget never executes") {
  TrainSetup setup = tiny_setup(3, 0.5);
  for (DeviceProfile& dev : setup.devices) dev.shift_ms_per_sample = 1e4;
  RngBundle rngs = seeded_bundle(101);
  const TrainingResult res = run_training(setup, rngs);
  CHECK(res.rounds.empty());
  CHECK(res.elapsed_s == 0.0);
}

TEST_CASE("max_rounds caps an unbounded budget") {
  TrainSetup setup = tiny_setup(3, std::numeric_limits<double>::infinity());
  setup.max_rounds = 4;
  RngBundle rngs = seeded_bundle(102);
  const TrainingResult res = run_training(setup, rngs);
  CHECK(res.rounds.size() == 4);
}

TEST_CASE("training is reproducible from equal seeds") {
  const TrainSetup setup = tiny_setup(4, 0.3);
  RngBundle a = seeded_bundle(200), b = seeded_bundle(200);
  const TrainingResult r1 = run_training(setup, a);
  const TrainingResult r2 = run_training(setup, b);
  REQUIRE(r1.rounds.size() == r2.rounds.size());
  CHECK(r1.final_model == r2.final_model);
  for (std::size_t i = 0; i < r1.rounds.size(); ++i) {
    CHECK(r1.rounds[i].t_star_s == r2.rounds[i].t_star_s);
    CHECK(r1.rounds[i].global_loss == r2.rounds[i].global_loss);
    CHECK(r1.rounds[i].scheduled == r2.rounds[i].scheduled);
  }
}
