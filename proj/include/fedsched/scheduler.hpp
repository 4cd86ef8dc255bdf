#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsched/allocator.hpp"
#include "fedsched/bound.hpp"
#include "fedsched/wireless.hpp"

namespace fedsched {

// Which devices to pick each round.
//   Fc            greedy by round latency, stopped by the convergence bound
//   FixedN        greedy by round latency, stopped at exactly n devices
//   Random        uniform n-subset
//   BestChannel   the n largest observed channel gains
//   EqualSplit    grow while every device finishes within threshold_s under
//                 a uniform bandwidth split
//   OptimalSplit  grow while the equal-finish-time latency stays within
//                 threshold_s
struct PolicySpec {
  enum class Kind { Fc, FixedN, Random, BestChannel, EqualSplit, OptimalSplit };
  Kind kind = Kind::Fc;
  int n = 3;
  double threshold_s = 0.4;

  std::string label() const;
};

// Scheduling decisions work on the observed round columns; the physical
// round duration is settled later against the true ones.
struct ScheduleContext {
  const RoundState& round;
  const std::vector<DeviceProfile>& devices;
  const RadioConfig& radio;
  const BoundParams& bound;
  double time_budget_s = 0.0;  // budget K_hat is computed against
  double epsilon_alloc = 1e-4;
};

struct ScheduleDecision {
  std::vector<int> ids;  // in order of selection
  AllocationResult allocation;
  std::int64_t k_hat = 1;
  std::optional<double> c_value;  // Fc and FixedN report their objective
  bool budget_exhausted = false;  // t* alone already exceeds the budget
  bool threshold_violated = false;  // no device fit under the threshold
};

ScheduleDecision schedule(const PolicySpec& policy, const ScheduleContext& ctx,
                          Rng& policy_rng);

}  // namespace fedsched
