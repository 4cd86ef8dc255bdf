#include "fedsched/wireless.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsched {

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) {
  if (!(watts > 0.0)) throw std::domain_error("watts_to_dbm: power must be > 0");
  return 10.0 * std::log10(watts) + 30.0;
}

Eigen::VectorXd place_devices(Rng& rng, int count, double radius_m, double min_dist_m) {
  if (count < 0) throw std::domain_error("place_devices: count must be >= 0");
  if (!(radius_m > 0.0) || !(min_dist_m >= 0.0) || min_dist_m > radius_m) {
    throw std::domain_error("place_devices: need 0 <= min_dist <= radius");
  }
  Eigen::VectorXd out(count);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < count; ++i) {
    out[i] = std::max(min_dist_m, radius_m * std::sqrt(unit(rng)));
  }
  return out;
}

double channel_gain_sq(double distance_m, double path_loss_exp) {
  if (!(distance_m > 0.0)) throw std::domain_error("channel_gain_sq: distance must be > 0");
  return std::pow(distance_m, -path_loss_exp);
}

double sample_comp_latency(Rng& rng, const DeviceProfile& dev, int local_steps) {
  if (local_steps < 1 || dev.batch_size < 1) {
    throw std::domain_error("sample_comp_latency: need local_steps >= 1 and batch_size >= 1");
  }
  if (!(dev.shift_ms_per_sample > 0.0) || !(dev.fluct_rate_per_ms > 0.0)) {
    throw std::domain_error("sample_comp_latency: latency parameters must be > 0");
  }
  const double samples = static_cast<double>(local_steps) * dev.batch_size;
  const double shift_ms = dev.shift_ms_per_sample * samples;
  std::exponential_distribution<double> fluct(dev.fluct_rate_per_ms / samples);
  return (shift_ms + fluct(rng)) * 1e-3;
}

double achievable_rate(double gamma, const RadioConfig& radio, double tx_power_w,
                       double gain_sq) {
  if (!(gamma > 0.0)) throw std::domain_error("achievable_rate: gamma must be > 0");
  if (!(tx_power_w > 0.0) || !(gain_sq > 0.0) || !(radio.bandwidth_hz > 0.0) ||
      !(radio.noise_w_per_hz > 0.0)) {
    throw std::domain_error("achievable_rate: physical inputs must be > 0");
  }
  const double band = gamma * radio.bandwidth_hz;
  const double snr = tx_power_w * gain_sq / (band * radio.noise_w_per_hz);
  return band * std::log2(1.0 + snr);
}

double comm_latency(double payload_bits, double rate_bps) {
  if (!(rate_bps > 0.0)) throw std::domain_error("comm_latency: rate must be > 0");
  if (payload_bits < 0.0) throw std::domain_error("comm_latency: payload must be >= 0");
  return payload_bits / rate_bps;
}

double perturb(Rng& rng, double value, double rel_std) {
  if (rel_std < 0.0) throw std::domain_error("perturb: rel_std must be >= 0");
  if (rel_std == 0.0) return value;
  if (!(value > 0.0)) throw std::domain_error("perturb: value must be > 0");
  std::normal_distribution<double> noise(0.0, rel_std * value);
  double out;
  do {
    out = value + noise(rng);
  } while (out <= 0.0);
  return out;
}

RoundState sample_round(int round_index, const std::vector<DeviceProfile>& devices,
                        const RoundSampling& opts, Rng& placement_rng,
                        Rng& channel_rng, Rng& compute_rng) {
  const int m = static_cast<int>(devices.size());
  RoundState rs;
  rs.round_index = round_index;
  rs.distances_m = place_devices(placement_rng, m, opts.radius_m, opts.min_dist_m);
  rs.gain_sq.resize(m);
  rs.comp_latency_s.resize(m);
  rs.observed_gain_sq.resize(m);
  rs.observed_comp_latency_s.resize(m);
  std::exponential_distribution<double> fading(1.0);
  for (int i = 0; i < m; ++i) {
    double g = channel_gain_sq(rs.distances_m[i], opts.path_loss_exp);
    if (opts.fading) g *= fading(channel_rng);
    rs.gain_sq[i] = g;
    rs.comp_latency_s[i] = sample_comp_latency(compute_rng, devices[i], opts.local_steps);
    if (opts.error_rel_std > 0.0) {
      const double amp = perturb(channel_rng, std::sqrt(g), opts.error_rel_std);
      rs.observed_gain_sq[i] = amp * amp;
      rs.observed_comp_latency_s[i] =
          perturb(compute_rng, rs.comp_latency_s[i], opts.error_rel_std);
    } else {
      rs.observed_gain_sq[i] = g;
      rs.observed_comp_latency_s[i] = rs.comp_latency_s[i];
    }
  }
  return rs;
}

}  // namespace fedsched
