#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

namespace fedsched {

using Rng = std::mt19937_64;

// Cell-wide radio constants. noise_w_per_hz is the one-sided PSD in W/Hz,
// upload_bits the payload every scheduled device sends per round.
struct RadioConfig {
  double bandwidth_hz = 20e6;
  double noise_w_per_hz = 3.981071705534969e-21;  // -114 dBm/MHz
  double upload_bits = 0.0;
};

// Static per-device description. Latency follows a shifted exponential:
// deterministic part shift_ms_per_sample * tau * batch_size, fluctuation
// Exponential with rate fluct_rate_per_ms / (tau * batch_size); the default
// rate 1/shift makes the fluctuation mean equal the deterministic part.
struct DeviceProfile {
  int id = 0;
  std::int64_t dataset_size = 0;   // D_i, samples held
  int batch_size = 0;              // d_i <= D_i, samples per local step
  double shift_ms_per_sample = 0.5;
  double fluct_rate_per_ms = 2.0;
  double tx_power_w = 0.01;        // 10 dBm
};

// Everything the scheduler may look at in one round. The observed_* columns
// are what the controller sees; they equal the true columns unless
// estimation error injection is on.
struct RoundState {
  int round_index = 0;
  Eigen::VectorXd distances_m;
  Eigen::VectorXd gain_sq;            // |h|^2, pure path loss by default
  Eigen::VectorXd comp_latency_s;     // realized t^cp this round
  Eigen::VectorXd observed_gain_sq;
  Eigen::VectorXd observed_comp_latency_s;
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

// Uniform placement on a disc of the given radius: r = radius * sqrt(U),
// clamped below at min_dist so the path-loss model stays finite.
Eigen::VectorXd place_devices(Rng& rng, int count, double radius_m, double min_dist_m);

// Power path-loss gain d^(-alpha).
double channel_gain_sq(double distance_m, double path_loss_exp);

// One draw of the shifted-exponential computation latency, in seconds.
double sample_comp_latency(Rng& rng, const DeviceProfile& dev, int local_steps);

// Shannon rate in bit/s of a device holding the bandwidth fraction gamma:
// gamma * B * log2(1 + P h^2 / (gamma * B * N0)). gamma <= 0 is a domain
// error; the SNR term grows as gamma shrinks because the noise floor is
// proportional to the allocated band.
double achievable_rate(double gamma, const RadioConfig& radio, double tx_power_w,
                       double gain_sq);

double comm_latency(double payload_bits, double rate_bps);

// value + Normal(0, rel_std * value), redrawn until positive. rel_std = 0
// returns value untouched (and consumes no randomness).
double perturb(Rng& rng, double value, double rel_std);

// Assembles one round: placement, gains, latency draws, observed copies.
// Gain observations perturb the amplitude |h| (then square); latency
// observations perturb t^cp directly. fading, when on, multiplies the
// path-loss gain by a unit-mean exponential draw.
struct RoundSampling {
  double radius_m = 600.0;
  double min_dist_m = 1.0;
  double path_loss_exp = 3.76;
  int local_steps = 5;
  double error_rel_std = 0.0;
  bool fading = false;
};

RoundState sample_round(int round_index, const std::vector<DeviceProfile>& devices,
                        const RoundSampling& opts, Rng& placement_rng,
                        Rng& channel_rng, Rng& compute_rng);

}  // namespace fedsched
