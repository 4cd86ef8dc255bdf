#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedsched/wireless.hpp"

namespace fedsched {

// Inputs the bandwidth solver needs per scheduled device. The caller picks
// whether these are true or observed values.
struct DeviceLink {
  double comp_latency_s = 0.0;
  double tx_power_w = 0.0;
  double gain_sq = 0.0;
};

// Output of optimal_allocation. gamma[j] pairs with links[j]; residual is
// the unallocated bandwidth fraction 1 - sum(gamma), kept within
// [0, epsilon] on success. bracket_width_s is the final search interval,
// a diagnostic for the iteration-count bound.
struct AllocationResult {
  double t_star_s = 0.0;
  std::vector<double> gamma;
  int iterations = 0;
  double residual = 0.0;
  double bracket_width_s = 0.0;
};

// Raised when the search cap t_up already needs more than the whole band;
// callers enlarge t_up and retry.
struct UnboundedSearchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimal bandwidth fraction that lets one device finish upload at exactly
// t_target. Empty when t_target is not reachable with any fraction: either
// no time remains after computing, or the requested rate exceeds what the
// full band can carry. Derivation: with c = P h^2 / (B N0) and
// G = S ln2 / ((t_target - t_cp) B c), the finish-time equation
// gamma B log2(1 + c/gamma) * (t_target - t_cp) = S rearranges to
// log(1+u) = G u for u = c/gamma. A positive root exists iff G < 1 and is
// u = -W_-1(-G e^-G)/G - 1 (the principal branch only returns the trivial
// u = 0), giving gamma = c / u. The returned fraction can exceed 1; the
// search interprets that as "infeasible at this target".
std::optional<double> required_gamma(double t_target_s, const DeviceLink& link,
                                     const RadioConfig& radio);

// Latency of a device holding the whole band: t_cp + S / (B log2(1 + c)).
// Closed form, no search; used to seed greedy scheduling and to build
// search caps.
double standalone_latency(const DeviceLink& link, const RadioConfig& radio);

// A cap with guaranteed slack: max t_cp + n * max standalone upload time
// exceeds the equal-split finish time of every device, so the demanded
// fractions at the cap always sum to at most 1.
double default_t_up(std::span<const DeviceLink> links, const RadioConfig& radio);

// Equal-finish-time bandwidth split for one round. Binary search on the
// round latency t: demand s(t) = sum of required fractions is strictly
// decreasing, so the search keeps [t_low, t_up] with s > 1 on the left and
// s < 1 - epsilon on the right, halving until s lands in [1 - epsilon, 1].
// Throws UnboundedSearchError when s(t_up) > 1 and std::domain_error on
// empty input or nonpositive epsilon.
AllocationResult optimal_allocation(std::span<const DeviceLink> links,
                                    const RadioConfig& radio, double epsilon,
                                    double t_up_s);

// optimal_allocation with default_t_up, doubling the cap on
// UnboundedSearchError (covers rounding at the cap; the default cannot be
// undershot by more than that).
AllocationResult allocate(std::span<const DeviceLink> links,
                          const RadioConfig& radio, double epsilon);

// Links assembled from a round snapshot for the given device ids, either
// from the observed columns (what the controller acts on) or the true ones.
std::vector<DeviceLink> links_for(const std::vector<int>& ids, const RoundState& round,
                                  const std::vector<DeviceProfile>& devices,
                                  bool observed);

// Physical duration of a round: every scheduled device computes, then
// uploads through the fraction it was granted; the slowest one ends the
// round. Evaluated with true channel and latency values, which differ from
// the controller's view when estimation error is injected.
double realized_round_latency(const std::vector<int>& ids,
                              const std::vector<double>& gamma,
                              const RoundState& round,
                              const std::vector<DeviceProfile>& devices,
                              const RadioConfig& radio);

}  // namespace fedsched
