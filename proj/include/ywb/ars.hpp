#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ywb/common.hpp"
#include "ywb/environment.hpp"
#include "ywb/rng.hpp"
#include "ywb/system.hpp"

namespace ywb {

// ----------------------------------------------------------------------------
// Random-search training configuration (antithetic two-point estimator with
// Adam smoothing and a single step-size drop late in training).
// ----------------------------------------------------------------------------
struct ArsConfig {
  int num_directions = 16;
  double sigma = 0.05;         // probe radius in parameter space
  double learning_rate = 0.01;
  int train_batch = 50;        // rollouts per objective evaluation
  int test_batch = 100;        // rollouts per test evaluation
  double grad_clip = 10.0;     // l2 cap applied to the raw estimate
  double lr_drop_factor = 0.1;
  double lr_drop_frac = 0.7;   // drop happens at floor(frac * epochs)
  int epochs = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int lr_drop_epoch() const;
  void validate() const;  // throws ConfigError naming the offending field
};

// ----------------------------------------------------------------------------
// Training task: maps a parameter vector to a batch cost.  The suite key
// seeds the batch's initial states and noise; reusing a key reproduces the
// exact same evaluation conditions (common random numbers).
// ----------------------------------------------------------------------------
struct TrainTask {
  Index param_count = 0;
  std::function<double(const Vec& params, std::uint64_t suite_key, int batch)> batch_cost;
  std::function<Vec(std::uint64_t seed)> init_params;
  std::uint64_t eval_seed = 0;   // frozen test-suite seed, shared per task
  double base_test_cost = 1.0;   // normalization denominator (base controller)
  std::string label;
};

// Frozen per-task test-suite key derived from the task's eval seed.
std::uint64_t eval_suite_key(const TrainTask& task);

// Mean batch cost of a policy prototype on the suite drawn from `suite_key`:
// initial states and per-rollout noise keys are derived deterministically
// from the key, so two calls with the same key see identical conditions.
double env_batch_cost(const Env& env, const Policy& prototype, std::uint64_t suite_key,
                      int batch);

// Wraps an environment + policy factory into a training task.  The
// normalization denominator is the base prototype's cost on the frozen test
// suite.
TrainTask make_env_task(const Env& env,
                        std::function<std::unique_ptr<Policy>(const Vec&)> make_policy,
                        std::function<Vec(std::uint64_t)> init_params, Index param_count,
                        const Policy& base_prototype, std::uint64_t eval_seed,
                        int test_batch = 100, const std::string& label = "");

// ----------------------------------------------------------------------------
// Two-point antithetic search-direction gradient estimate.
// ----------------------------------------------------------------------------
struct ArsGradient {
  Vec grad;          // (1 / (N sigma)) * sum dJ/2 * delta_i
  double mean_cost;  // mean over all 2N probe evaluations
};

ArsGradient ars_gradient(const std::function<double(const Vec&)>& objective, const Vec& theta,
                         double sigma, int num_directions, RngStream& direction_stream);

// Caps the vector's l2 norm at `max_norm` (direction preserved).
void clip_l2(Vec& g, double max_norm);

// ----------------------------------------------------------------------------
// Training log.
// ----------------------------------------------------------------------------
struct TrainRecord {
  int epoch = 0;
  double train_cost = 0.0;
  double test_cost = 0.0;
  double normalized_test_cost = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
  std::uint64_t rng_digest = 0;  // deterministic digest of the epoch's stream keys
};

struct TrainEvent {
  int epoch = 0;
  std::string what;
};

struct TrainLog {
  std::vector<TrainRecord> records;  // epoch 0 (initial point) .. epochs
  std::vector<TrainEvent> events;
  Vec final_params;
  Vec best_params;
  double best_test_cost = 0.0;
  int best_epoch = 0;
  double base_cost = 1.0;
};

// Writes `epoch, train_cost, test_cost, normalized_test_cost, grad_norm, lr,
// wall_ms` rows.
void write_train_log_csv(const std::string& path, const TrainLog& log);

// Same columns minus wall_ms, for byte-stable comparisons across reruns.
void write_train_log_csv_deterministic(const std::string& path, const TrainLog& log);

// ----------------------------------------------------------------------------
// Training loop: evaluates the initial point, then per epoch estimates a
// gradient on a fresh training suite, clips it, applies Adam, and tracks the
// best parameters by frozen-suite test cost.  A non-finite parameter update
// is rolled back and retried once at half the step before being skipped.
// ----------------------------------------------------------------------------
TrainLog train(const TrainTask& task, const ArsConfig& cfg, std::uint64_t seed,
               const Vec& theta0);

// ----------------------------------------------------------------------------
// Multi-seed campaign.
// ----------------------------------------------------------------------------
struct SeedRun {
  std::uint64_t seed = 0;
  TrainLog log;
  bool ok = false;
  std::string error;
};

struct CampaignResult {
  std::vector<SeedRun> runs;

  int completed() const;
  // Per-epoch mean/min/max of normalized test cost over completed runs.
  std::vector<std::array<double, 3>> normalized_band() const;
  // Final-epoch normalized test costs of completed runs.
  std::vector<double> final_normalized() const;
  // Best (lowest) normalized test costs of completed runs.
  std::vector<double> best_normalized() const;
};

CampaignResult multi_seed_campaign(const TrainTask& task, const ArsConfig& cfg,
                                   const std::vector<std::uint64_t>& seeds);

}  // namespace ywb
