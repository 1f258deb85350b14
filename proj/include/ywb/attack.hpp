#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ywb/common.hpp"
#include "ywb/environment.hpp"
#include "ywb/system.hpp"

namespace ywb {

// ----------------------------------------------------------------------------
// Adversarial measurement perturbations: per-step additive offsets on the
// policy's measurement, each bounded in l2 norm by a budget epsilon.
// ----------------------------------------------------------------------------
struct AttackConfig {
  double epsilon = 0.0;        // per-step l2 budget on the measurement offset
  int window = 10;             // receding optimization window (steps)
  int iters = 20;              // optimizer iterations per step
  int batch = 12;              // rollouts per evaluation
  std::uint64_t seed = 0;      // evaluation suite + optimizer randomness
  double tail_fraction = 0.5;  // trailing horizon fraction scored for deviation

  void validate() const;
};

struct AttackedRollout {
  Trajectory trajectory;
  std::vector<Vec> offsets;  // measurement offsets actually applied
  double deviation = 0.0;    // task tracking deviation over the tail
};

// Rollout under a fixed offset sequence (zero-padded past its end).  With an
// empty sequence this reproduces the clean rollout for the same key bit for
// bit.
AttackedRollout attacked_rollout(const Env& env, const Policy& prototype, const Vec& x0,
                                 std::uint64_t noise_key, const std::vector<Vec>& offsets,
                                 double tail_fraction = 0.5);

// Synthesizes a worst-case offset sequence online: at each step a
// receding-horizon window of offsets is optimized by random-direction ascent
// (projected onto the per-step budget ball), the zero sequence is always kept
// as a candidate, and the first block of the best window is applied.
AttackedRollout synthesize_attack(const Env& env, const Policy& prototype, const Vec& x0,
                                  std::uint64_t noise_key, const AttackConfig& cfg);

// ----------------------------------------------------------------------------
// Batched evaluation on a frozen suite derived from cfg.seed.
// ----------------------------------------------------------------------------
struct AttackSummary {
  double epsilon = 0.0;
  double mean_cost = 0.0;       // attacked batch mean rollout cost
  double clean_cost = 0.0;      // same suite, no attack
  double mean_norm_cost = 0.0;  // mean_cost / normalizer
  double mean_deviation = 0.0;
  bool criterion_hit = false;   // mean deviation above the task threshold
  int batch = 0;
};

// normalizer <= 0 uses the suite's clean cost as the denominator.
AttackSummary evaluate_attack(const Env& env, const Policy& prototype, const AttackConfig& cfg,
                              double normalizer = 0.0);

// ----------------------------------------------------------------------------
// Smallest budget that breaks the task: bisection on epsilon against the
// running-max deviation envelope (deviation is treated as nondecreasing in
// the budget; the envelope enforces that on noisy measurements).
// ----------------------------------------------------------------------------
struct SweepPoint {
  double epsilon = 0.0;
  double mean_cost = 0.0;
  double mean_norm_cost = 0.0;
  double mean_deviation = 0.0;
  bool criterion_hit = false;
};

struct CriticalAttackResult {
  double critical_epsilon = 0.0;
  double lo = 0.0, hi = 0.0;      // final bracket
  bool censored_low = false;      // already broken at the smallest budget
  bool censored_high = false;     // never broken within the largest budget
  std::vector<SweepPoint> evaluations;  // ordered by evaluation time
};

CriticalAttackResult critical_attack_size(const Env& env, const Policy& prototype,
                                          const AttackConfig& cfg, double eps_lo, double eps_hi,
                                          int bisect_iters = 8, double normalizer = 0.0,
                                          int max_expansions = 3);

// ----------------------------------------------------------------------------
// Open-loop policy gain probe: worst observed ratio between output change and
// measurement change when a baseline measurement sequence is perturbed inside
// the probe ball.
// ----------------------------------------------------------------------------
double empirical_policy_gain(const Policy& prototype, const std::vector<Vec>& baseline_y,
                             int probes, std::uint64_t seed, double probe_scale = 0.1);

}  // namespace ywb
