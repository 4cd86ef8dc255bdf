#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fedsched/wireless.hpp"

using namespace fedsched;

namespace {

DeviceProfile test_device(int id = 0) {
  DeviceProfile dev;
  dev.id = id;
  dev.dataset_size = 500;
  dev.batch_size = 128;
  dev.shift_ms_per_sample = 0.5;
  dev.fluct_rate_per_ms = 2.0;
  dev.tx_power_w = 0.01;
  return dev;
}

}  // namespace

TEST_CASE("dBm conversions") {
  CHECK(dbm_to_watts(10.0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dbm_to_watts(-114.0) == doctest::Approx(3.981071705534969e-15).epsilon(1e-12));
  for (double dbm : {-114.0, -30.0, 0.0, 10.0, 23.0}) {
    CHECK(watts_to_dbm(dbm_to_watts(dbm)) == doctest::Approx(dbm).epsilon(1e-12));
  }
}

TEST_CASE("placement stays on the annulus and fills the disc") {
  Rng rng(42);
  const double radius = 600.0, min_dist = 5.0;
  const Eigen::VectorXd d = place_devices(rng, 20000, radius, min_dist);
  REQUIRE(d.size() == 20000);
  CHECK(d.minCoeff() >= min_dist);
  CHECK(d.maxCoeff() <= radius);
  // r = R sqrt(U) makes E[r^2] = R^2 / 2.
  const double mean_sq = d.array().square().mean();
  CHECK(mean_sq == doctest::Approx(radius * radius / 2.0).epsilon(0.02));
}

TEST_CASE("path loss gain") {
  CHECK(channel_gain_sq(2.0, 3.0) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(channel_gain_sq(1.0, 3.76) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(channel_gain_sq(10.0, 3.76) == doctest::Approx(std::pow(10.0, -3.76)).epsilon(1e-12));
}

TEST_CASE("computation latency is a shifted exponential") {
  const DeviceProfile dev = test_device();
  const int tau = 5;
  const double shift_s = dev.shift_ms_per_sample * tau * dev.batch_size * 1e-3;
  Rng rng(7);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double t = sample_comp_latency(rng, dev, tau);
    REQUIRE(t >= shift_s);
    sum += t;
  }
  // rate = fluct_rate / (tau d) per ms, so the fluctuation mean is
  // tau d / fluct_rate = shift / (fluct_rate * shift_per_sample) ms.
  const double fluct_mean_s = tau * dev.batch_size / dev.fluct_rate_per_ms * 1e-3;
  CHECK(sum / 20000 == doctest::Approx(shift_s + fluct_mean_s).epsilon(0.02));
}

TEST_CASE("achievable rate follows the Shannon formula and grows with gamma") {
  RadioConfig radio;
  radio.upload_bits = 1e5;
  const double p = 0.01, g = 1e-9;
  const double c = p * g / (radio.bandwidth_hz * radio.noise_w_per_hz);
  const double expect = radio.bandwidth_hz * std::log2(1.0 + c);
  CHECK(achievable_rate(1.0, radio, p, g) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(achievable_rate(0.25, radio, p, g) < achievable_rate(0.5, radio, p, g));
  CHECK(achievable_rate(0.5, radio, p, g) < achievable_rate(1.0, radio, p, g));
  // Halving gamma less than halves the rate: the per-Hz SNR improves.
  CHECK(achievable_rate(0.5, radio, p, g) > 0.5 * expect);
  CHECK_THROWS_AS(achievable_rate(0.0, radio, p, g), std::domain_error);
  CHECK_THROWS_AS(achievable_rate(-0.1, radio, p, g), std::domain_error);
  CHECK(comm_latency(2e6, 1e6) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("perturb with zero spread is the identity and draws nothing") {
  Rng a(123), b(123);
  for (double v : {0.5, 1.0, 42.0}) CHECK(perturb(a, v, 0.0) == v);
  CHECK(a() == b());  // stream untouched
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    const double v = perturb(rng, 1e-3, 2.0);
    CHECK(v > 0.0);
  }
}

TEST_CASE("sample_round is deterministic and honest without error injection") {
  std::vector<DeviceProfile> devices;
  for (int i = 0; i < 12; ++i) devices.push_back(test_device(i));
  RoundSampling opts;

  Rng p1(1), c1(2), k1(3), p2(1), c2(2), k2(3);
  const RoundState a = sample_round(4, devices, opts, p1, c1, k1);
  const RoundState b = sample_round(4, devices, opts, p2, c2, k2);
  REQUIRE(a.distances_m.size() == 12);
  CHECK(a.round_index == 4);
  CHECK(a.distances_m == b.distances_m);
  CHECK(a.gain_sq == b.gain_sq);
  CHECK(a.comp_latency_s == b.comp_latency_s);

  for (int i = 0; i < 12; ++i) {
    CHECK(a.gain_sq[i] ==
          doctest::Approx(channel_gain_sq(a.distances_m[i], opts.path_loss_exp))
              .epsilon(1e-12));
    CHECK(a.observed_gain_sq[i] == a.gain_sq[i]);
    CHECK(a.observed_comp_latency_s[i] == a.comp_latency_s[i]);
  }
}

TEST_CASE("error injection perturbs only the observed columns") {
  std::vector<DeviceProfile> devices;
  for (int i = 0; i < 50; ++i) devices.push_back(test_device(i));
  RoundSampling opts;
  opts.error_rel_std = 0.3;
  Rng p(1), c(2), k(3);
  const RoundState rs = sample_round(0, devices, opts, p, c, k);
  int differing = 0;
  for (int i = 0; i < 50; ++i) {
    CHECK(rs.observed_gain_sq[i] > 0.0);
    CHECK(rs.observed_comp_latency_s[i] > 0.0);
    if (rs.observed_gain_sq[i] != rs.gain_sq[i]) ++differing;
    // True values stay physical regardless of what the controller sees.
    CHECK(rs.gain_sq[i] ==
          doctest::Approx(channel_gain_sq(rs.distances_m[i], opts.path_loss_exp))
              .epsilon(1e-12));
  }
  CHECK(differing == 50);
}

TEST_CASE("fading scales gains by a unit-mean factor") {
  std::vector<DeviceProfile> devices;
  for (int i = 0; i < 4000; ++i) devices.push_back(test_device(i));
  RoundSampling plain, faded;
  faded.fading = true;

  Rng p1(11), c1(12), k1(13), p2(11), c2(12), k2(13);
  const RoundState a = sample_round(0, devices, plain, p1, c1, k1);
  const RoundState b = sample_round(0, devices, faded, p2, c2, k2);
  CHECK(a.distances_m == b.distances_m);  // placement stream is independent
  double ratio_sum = 0.0;
  for (int i = 0; i < 4000; ++i) {
    CHECK(b.gain_sq[i] > 0.0);
    ratio_sum += b.gain_sq[i] / a.gain_sq[i];
  }
  CHECK(ratio_sum / 4000 == doctest::Approx(1.0).epsilon(0.05));
}
