#include "fedsched/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedsched/numeric.hpp"

namespace fedsched {
namespace {

constexpr double kLn2 = 0.6931471805599453;

void check_link(const DeviceLink& link, const RadioConfig& radio) {
  if (!(link.tx_power_w > 0.0) || !(link.gain_sq > 0.0) ||
      !(radio.bandwidth_hz > 0.0) || !(radio.noise_w_per_hz > 0.0) ||
      !(radio.upload_bits > 0.0) || !(link.comp_latency_s >= 0.0)) {
    throw std::domain_error("allocator: physical inputs must be positive");
  }
}

// Full-band SNR c = P h^2 / (B N0).
double full_band_snr(const DeviceLink& link, const RadioConfig& radio) {
  return link.tx_power_w * link.gain_sq /
         (radio.bandwidth_hz * radio.noise_w_per_hz);
}

// Demanded bandwidth total at round latency t; +inf when any device cannot
// make t at all.
double demand(double t, std::span<const DeviceLink> links, const RadioConfig& radio) {
  double s = 0.0;
  for (const DeviceLink& link : links) {
    const auto gamma = required_gamma(t, link, radio);
    if (!gamma) return std::numeric_limits<double>::infinity();
    s += *gamma;
  }
  return s;
}

}  // namespace

std::optional<double> required_gamma(double t_target_s, const DeviceLink& link,
                                     const RadioConfig& radio) {
  check_link(link, radio);
  const double remaining = t_target_s - link.comp_latency_s;
  if (!(remaining > 0.0)) return std::nullopt;
  const double c = full_band_snr(link, radio);
  const double g = radio.upload_bits * kLn2 / (remaining * radio.bandwidth_hz * c);
  if (g >= 1.0) return std::nullopt;  // full band cannot carry the rate
  const double u = -lambert_w(WBranch::Secondary, -g * std::exp(-g)) / g - 1.0;
  return c / u;
}

double standalone_latency(const DeviceLink& link, const RadioConfig& radio) {
  check_link(link, radio);
  const double rate = radio.bandwidth_hz * std::log2(1.0 + full_band_snr(link, radio));
  return link.comp_latency_s + radio.upload_bits / rate;
}

double default_t_up(std::span<const DeviceLink> links, const RadioConfig& radio) {
  double max_cp = 0.0;
  double max_comm = 0.0;
  for (const DeviceLink& link : links) {
    max_cp = std::max(max_cp, link.comp_latency_s);
    max_comm = std::max(max_comm, standalone_latency(link, radio) - link.comp_latency_s);
  }
  // Tiny inflation so a singleton's exact optimum at the cap cannot round
  // into the "demand > 1" branch.
  return (max_cp + static_cast<double>(links.size()) * max_comm) * (1.0 + 1e-9);
}

AllocationResult optimal_allocation(std::span<const DeviceLink> links,
                                    const RadioConfig& radio, double epsilon,
                                    double t_up_s) {
  if (links.empty()) throw std::domain_error("optimal_allocation: empty device set");
  if (!(epsilon > 0.0) || epsilon >= 1.0) {
    throw std::domain_error("optimal_allocation: epsilon must be in (0, 1)");
  }
  double t_low = 0.0;
  for (const DeviceLink& link : links) {
    check_link(link, radio);
    t_low = std::max(t_low, link.comp_latency_s);
  }
  if (!(t_up_s > t_low)) {
    throw UnboundedSearchError("optimal_allocation: t_up below the slowest computation");
  }

  double t_up = t_up_s;
  double t = t_up;
  AllocationResult res;
  for (int iter = 1; iter <= 200; ++iter) {
    const double s = demand(t, links, radio);
    res.iterations = iter;
    if (s >= 1.0 - epsilon && s <= 1.0) {
      res.t_star_s = t;
      res.residual = 1.0 - s;
      res.bracket_width_s = t_up - t_low;
      res.gamma.reserve(links.size());
      for (const DeviceLink& link : links) {
        res.gamma.push_back(*required_gamma(t, link, radio));
      }
      return res;
    }
    if (s > 1.0) {
      if (t == t_up_s) {
        throw UnboundedSearchError(
            "optimal_allocation: demand exceeds the band at t_up; enlarge t_up");
      }
      t_low = t;
      t = 0.5 * (t + t_up);
    } else {  // s < 1 - epsilon: latency can shrink
      t_up = t;
      t = 0.5 * (t + t_low);
    }
    if (t == t_low || t == t_up) {
      // Bracket collapsed to adjacent doubles without hitting the band;
      // epsilon below latency resolution.
      throw std::domain_error("optimal_allocation: epsilon unresolvable at double precision");
    }
  }
  throw std::domain_error("optimal_allocation: iteration cap exceeded");
}

AllocationResult allocate(std::span<const DeviceLink> links,
                          const RadioConfig& radio, double epsilon) {
  double t_up = default_t_up(links, radio);
  for (int attempt = 0; attempt < 64; ++attempt) {
    try {
      return optimal_allocation(links, radio, epsilon, t_up);
    } catch (const UnboundedSearchError&) {
      t_up *= 2.0;
    }
  }
  throw std::domain_error("allocate: no feasible latency under any tried cap");
}

std::vector<DeviceLink> links_for(const std::vector<int>& ids, const RoundState& round,
                                  const std::vector<DeviceProfile>& devices,
                                  bool observed) {
  std::vector<DeviceLink> links;
  links.reserve(ids.size());
  for (int id : ids) {
    links.push_back({observed ? round.observed_comp_latency_s[id] : round.comp_latency_s[id],
                     devices[id].tx_power_w,
                     observed ? round.observed_gain_sq[id] : round.gain_sq[id]});
  }
  return links;
}

double realized_round_latency(const std::vector<int>& ids,
                              const std::vector<double>& gamma,
                              const RoundState& round,
                              const std::vector<DeviceProfile>& devices,
                              const RadioConfig& radio) {
  double worst = 0.0;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const int id = ids[j];
    const double rate =
        achievable_rate(gamma[j], radio, devices[id].tx_power_w, round.gain_sq[id]);
    worst = std::max(worst, round.comp_latency_s[id] +
                                comm_latency(radio.upload_bits, rate));
  }
  return worst;
}

}  // namespace fedsched
