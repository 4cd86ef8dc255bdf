#include "fedsched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fedsched {
namespace {

// K_hat values are floored into [1, 9e15]; the cap keeps later double
// arithmetic exact while behaving like "unlimited rounds".
constexpr std::int64_t kMaxRounds = 9'000'000'000'000'000;

std::int64_t k_hat_for(double budget_s, double t_star_s, bool* exhausted) {
  if (std::isinf(budget_s)) return kMaxRounds;
  const double k = std::floor(budget_s / t_star_s);
  if (k < 1.0) {
    *exhausted = true;
    return 1;
  }
  return std::min(static_cast<std::int64_t>(k), kMaxRounds);
}

DeviceLink observed_link(const ScheduleContext& ctx, int id) {
  return {ctx.round.observed_comp_latency_s[id], ctx.devices[id].tx_power_w,
          ctx.round.observed_gain_sq[id]};
}

// Upload finish time of one device granted the fraction gamma, on observed
// values.
double observed_finish(const ScheduleContext& ctx, int id, double gamma) {
  const double rate = achievable_rate(gamma, ctx.radio, ctx.devices[id].tx_power_w,
                                      ctx.round.observed_gain_sq[id]);
  return ctx.round.observed_comp_latency_s[id] +
         comm_latency(ctx.radio.upload_bits, rate);
}

int fastest_standalone(const ScheduleContext& ctx) {
  int best = 0;
  double best_t = std::numeric_limits<double>::infinity();
  for (int id = 0; id < static_cast<int>(ctx.devices.size()); ++id) {
    const double t = standalone_latency(observed_link(ctx, id), ctx.radio);
    if (t < best_t) {
      best_t = t;
      best = id;
    }
  }
  return best;
}

AllocationResult allocate_ids(const ScheduleContext& ctx, const std::vector<int>& ids) {
  const auto links = links_for(ids, ctx.round, ctx.devices, /*observed=*/true);
  return allocate(links, ctx.radio, ctx.epsilon_alloc);
}

// Latency-greedy growth shared by Fc, FixedN and OptimalSplit: always try
// the candidate whose addition keeps the equal-finish-time latency lowest,
// ties to the lowest id.
struct GrowthStep {
  int id = -1;
  AllocationResult alloc;
};

GrowthStep best_addition(const ScheduleContext& ctx, const std::vector<int>& ids,
                         const std::vector<bool>& taken) {
  GrowthStep best;
  double best_t = std::numeric_limits<double>::infinity();
  std::vector<int> trial = ids;
  trial.push_back(-1);
  for (int id = 0; id < static_cast<int>(ctx.devices.size()); ++id) {
    if (taken[id]) continue;
    trial.back() = id;
    AllocationResult a = allocate_ids(ctx, trial);
    if (a.t_star_s < best_t) {
      best_t = a.t_star_s;
      best = {id, std::move(a)};
    }
  }
  return best;
}

ScheduleDecision finish_decision(const ScheduleContext& ctx, std::vector<int> ids,
                                 AllocationResult alloc,
                                 std::optional<double> c_value) {
  ScheduleDecision dec;
  dec.ids = std::move(ids);
  dec.allocation = std::move(alloc);
  dec.c_value = c_value;
  dec.k_hat = k_hat_for(ctx.time_budget_s, dec.allocation.t_star_s, &dec.budget_exhausted);
  return dec;
}

ScheduleDecision schedule_bound_greedy(const ScheduleContext& ctx, int fixed_n) {
  const int m = static_cast<int>(ctx.devices.size());
  std::vector<bool> taken(m, false);
  std::vector<int> ids{fastest_standalone(ctx)};
  taken[ids[0]] = true;
  AllocationResult alloc = allocate_ids(ctx, ids);

  bool exhausted = false;
  std::int64_t k_hat = k_hat_for(ctx.time_budget_s, alloc.t_star_s, &exhausted);
  double c = myopic_objective(k_hat, 1, ctx.bound);

  const int stop_n = fixed_n > 0 ? std::min(fixed_n, m) : m;
  while (static_cast<int>(ids.size()) < stop_n) {
    GrowthStep step = best_addition(ctx, ids, taken);
    bool exhausted_next = false;
    const std::int64_t k_next =
        k_hat_for(ctx.time_budget_s, step.alloc.t_star_s, &exhausted_next);
    const double c_next =
        myopic_objective(k_next, static_cast<int>(ids.size()) + 1, ctx.bound);
    // Fc stops at the first objective increase; FixedN ignores the
    // objective and fills up to its quota.
    if (fixed_n == 0 && c_next > c) break;
    ids.push_back(step.id);
    taken[step.id] = true;
    alloc = std::move(step.alloc);
    k_hat = k_next;
    c = c_next;
    exhausted = exhausted_next;
  }

  ScheduleDecision dec = finish_decision(ctx, std::move(ids), std::move(alloc), c);
  dec.budget_exhausted = exhausted;
  return dec;
}

ScheduleDecision schedule_random(const ScheduleContext& ctx, int n, Rng& rng) {
  const int m = static_cast<int>(ctx.devices.size());
  const int want = std::clamp(n, 1, m);
  std::vector<int> ids(m);
  std::iota(ids.begin(), ids.end(), 0);
  for (int j = 0; j < want; ++j) {
    std::uniform_int_distribution<int> pick(j, m - 1);
    std::swap(ids[j], ids[pick(rng)]);
  }
  ids.resize(want);
  return finish_decision(ctx, ids, allocate_ids(ctx, ids), std::nullopt);
}

ScheduleDecision schedule_best_channel(const ScheduleContext& ctx, int n) {
  const int m = static_cast<int>(ctx.devices.size());
  const int want = std::clamp(n, 1, m);
  std::vector<int> ids(m);
  std::iota(ids.begin(), ids.end(), 0);
  std::sort(ids.begin(), ids.end(), [&ctx](int a, int b) {
    const double ga = ctx.round.observed_gain_sq[a];
    const double gb = ctx.round.observed_gain_sq[b];
    return ga != gb ? ga > gb : a < b;
  });
  ids.resize(want);
  return finish_decision(ctx, ids, allocate_ids(ctx, ids), std::nullopt);
}

ScheduleDecision schedule_equal_split(const ScheduleContext& ctx, double threshold_s) {
  const int m = static_cast<int>(ctx.devices.size());
  std::vector<bool> taken(m, false);
  std::vector<int> ids;
  while (static_cast<int>(ids.size()) < m) {
    const double gamma = 1.0 / (static_cast<double>(ids.size()) + 1.0);
    int pick = -1;
    double pick_t = std::numeric_limits<double>::infinity();
    for (int id = 0; id < m; ++id) {
      if (taken[id]) continue;
      const double t = observed_finish(ctx, id, gamma);
      if (t < pick_t) {
        pick_t = t;
        pick = id;
      }
    }
    double worst = pick_t;
    for (int id : ids) worst = std::max(worst, observed_finish(ctx, id, gamma));
    if (worst > threshold_s) break;
    ids.push_back(pick);
    taken[pick] = true;
  }

  ScheduleDecision dec;
  if (ids.empty()) {
    dec.threshold_violated = true;
    ids.push_back(fastest_standalone(ctx));
  }
  const double gamma = 1.0 / static_cast<double>(ids.size());
  AllocationResult alloc;
  alloc.gamma.assign(ids.size(), gamma);
  alloc.residual = 1.0 - gamma * static_cast<double>(ids.size());
  for (int id : ids) {
    alloc.t_star_s = std::max(alloc.t_star_s, observed_finish(ctx, id, gamma));
  }
  const bool violated = dec.threshold_violated;
  dec = finish_decision(ctx, std::move(ids), std::move(alloc), std::nullopt);
  dec.threshold_violated = violated;
  return dec;
}

ScheduleDecision schedule_optimal_split(const ScheduleContext& ctx, double threshold_s) {
  const int m = static_cast<int>(ctx.devices.size());
  std::vector<bool> taken(m, false);
  std::vector<int> ids{fastest_standalone(ctx)};
  taken[ids[0]] = true;
  AllocationResult alloc = allocate_ids(ctx, ids);

  ScheduleDecision dec;
  if (alloc.t_star_s > threshold_s) {
    dec = finish_decision(ctx, std::move(ids), std::move(alloc), std::nullopt);
    dec.threshold_violated = true;
    return dec;
  }
  while (static_cast<int>(ids.size()) < m) {
    GrowthStep step = best_addition(ctx, ids, taken);
    if (step.alloc.t_star_s > threshold_s) break;
    ids.push_back(step.id);
    taken[step.id] = true;
    alloc = std::move(step.alloc);
  }
  return finish_decision(ctx, std::move(ids), std::move(alloc), std::nullopt);
}

}  // namespace

std::string PolicySpec::label() const {
  switch (kind) {
    case Kind::Fc:
      return "fc";
    case Kind::FixedN:
      return "fixed_n(" + std::to_string(n) + ")";
    case Kind::Random:
      return "random(" + std::to_string(n) + ")";
    case Kind::BestChannel:
      return "best_channel(" + std::to_string(n) + ")";
    case Kind::EqualSplit: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "equal_split(%g)", threshold_s);
      return buf;
    }
    case Kind::OptimalSplit: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "optimal_split(%g)", threshold_s);
      return buf;
    }
  }
  throw std::logic_error("PolicySpec: unknown kind");
}

ScheduleDecision schedule(const PolicySpec& policy, const ScheduleContext& ctx,
                          Rng& policy_rng) {
  if (ctx.devices.empty()) throw std::domain_error("schedule: no devices");
  if (!(ctx.time_budget_s > 0.0)) throw std::domain_error("schedule: budget must be > 0");
  switch (policy.kind) {
    case PolicySpec::Kind::Fc:
      return schedule_bound_greedy(ctx, 0);
    case PolicySpec::Kind::FixedN:
      return schedule_bound_greedy(ctx, std::max(policy.n, 1));
    case PolicySpec::Kind::Random:
      return schedule_random(ctx, policy.n, policy_rng);
    case PolicySpec::Kind::BestChannel:
      return schedule_best_channel(ctx, policy.n);
    case PolicySpec::Kind::EqualSplit:
      return schedule_equal_split(ctx, policy.threshold_s);
    case PolicySpec::Kind::OptimalSplit:
      return schedule_optimal_split(ctx, policy.threshold_s);
  }
  throw std::logic_error("schedule: unknown policy kind");
}

}  // namespace fedsched
