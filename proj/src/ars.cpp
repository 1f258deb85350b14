#include "ywb/ars.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace ywb {

namespace {

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("ars." + field + ": " + what);
}

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

void write_records(const std::string& path, const TrainLog& log, bool with_wall) {
  std::ofstream f(path);
  require(f.good(), "train log: cannot open " + path);
  f << "epoch,train_cost,test_cost,normalized_test_cost,grad_norm,lr";
  if (with_wall) f << ",wall_ms";
  f << "\n";
  char buf[512];
  for (const TrainRecord& r : log.records) {
    if (with_wall) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                    r.train_cost, r.test_cost, r.normalized_test_cost, r.grad_norm, r.lr,
                    r.wall_ms);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                    r.train_cost, r.test_cost, r.normalized_test_cost, r.grad_norm, r.lr);
    }
    f << buf;
  }
  require(f.good(), "train log: write failed for " + path);
}

}  // namespace

// ----------------------------------------------------------------------------
// Config.
// ----------------------------------------------------------------------------

int ArsConfig::lr_drop_epoch() const {
  return static_cast<int>(std::floor(lr_drop_frac * epochs));
}

void ArsConfig::validate() const {
  check(num_directions >= 1, "num_directions", "must be at least 1");
  check(sigma > 0.0 && std::isfinite(sigma), "sigma", "must be positive");
  check(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate",
        "must be positive");
  check(train_batch >= 1, "train_batch", "must be at least 1");
  check(test_batch >= 1, "test_batch", "must be at least 1");
  check(grad_clip > 0.0, "grad_clip", "must be positive");
  check(lr_drop_factor > 0.0 && lr_drop_factor <= 1.0, "lr_drop_factor", "must be in (0, 1]");
  check(lr_drop_frac >= 0.0 && lr_drop_frac <= 1.0, "lr_drop_frac", "must be in [0, 1]");
  check(epochs >= 0, "epochs", "must be non-negative");
  check(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1", "must be in [0, 1)");
  check(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2", "must be in [0, 1)");
  check(adam_eps > 0.0, "adam_eps", "must be positive");
}

// ----------------------------------------------------------------------------
// Task plumbing.
// ----------------------------------------------------------------------------

std::uint64_t eval_suite_key(const TrainTask& task) {
  return derive_stream(task.eval_seed, {stream_id::kEvalSuite});
}

double env_batch_cost(const Env& env, const Policy& prototype, std::uint64_t suite_key,
                      int batch) {
  require(batch >= 1, "batch cost: batch must be at least 1");
  std::vector<Vec> ics(batch);
  std::vector<std::uint64_t> noise_keys(batch);
  for (int i = 0; i < batch; ++i) {
    RngStream icr(
        derive_stream(suite_key, {stream_id::kInitialState, static_cast<std::uint64_t>(i)}));
    ics[i] = env.sample_initial_state(icr);
    noise_keys[i] =
        derive_stream(suite_key, {stream_id::kRolloutNoise, static_cast<std::uint64_t>(i)});
  }
  const SystemContract plant = env.contract();
  const auto trajectories = batch_rollout(plant, prototype, ics, noise_keys, env.process_std(),
                                          env.measurement_std(), env.rollout_options());
  return mean_total_cost(trajectories);
}

TrainTask make_env_task(const Env& env,
                        std::function<std::unique_ptr<Policy>(const Vec&)> make_policy,
                        std::function<Vec(std::uint64_t)> init_params, Index param_count,
                        const Policy& base_prototype, std::uint64_t eval_seed, int test_batch,
                        const std::string& label) {
  TrainTask task;
  task.param_count = param_count;
  task.eval_seed = eval_seed;
  task.init_params = std::move(init_params);
  task.label = label.empty() ? env.name() : label;
  task.batch_cost = [&env, make_policy = std::move(make_policy)](
                        const Vec& params, std::uint64_t suite_key, int batch) {
    const auto prototype = make_policy(params);
    return env_batch_cost(env, *prototype, suite_key, batch);
  };
  task.base_test_cost =
      env_batch_cost(env, base_prototype, eval_suite_key(task), test_batch);
  require(task.base_test_cost > 0.0, "train task: base test cost must be positive");
  return task;
}

// ----------------------------------------------------------------------------
// Gradient estimate.
// ----------------------------------------------------------------------------

ArsGradient ars_gradient(const std::function<double(const Vec&)>& objective, const Vec& theta,
                         double sigma, int num_directions, RngStream& direction_stream) {
  require(sigma > 0.0, "ars gradient: sigma must be positive");
  require(num_directions >= 1, "ars gradient: need at least one direction");
  ArsGradient out;
  out.grad = Vec::Zero(theta.size());
  Vec delta(theta.size()), probe(theta.size());
  double total = 0.0;
  for (int i = 0; i < num_directions; ++i) {
    direction_stream.fill_gaussian(delta);
    probe = theta + sigma * delta;
    const double j_plus = objective(probe);
    probe = theta - sigma * delta;
    const double j_minus = objective(probe);
    out.grad.noalias() += (0.5 * (j_plus - j_minus)) * delta;
    total += j_plus + j_minus;
  }
  out.grad /= static_cast<double>(num_directions) * sigma;
  out.mean_cost = total / (2.0 * num_directions);
  return out;
}

void clip_l2(Vec& g, double max_norm) {
  const double n = g.norm();
  if (std::isfinite(n) && n > max_norm && n > 0.0) g *= max_norm / n;
}

// ----------------------------------------------------------------------------
// Log output.
// ----------------------------------------------------------------------------

void write_train_log_csv(const std::string& path, const TrainLog& log) {
  write_records(path, log, true);
}

void write_train_log_csv_deterministic(const std::string& path, const TrainLog& log) {
  write_records(path, log, false);
}

// ----------------------------------------------------------------------------
// Training loop.
// ----------------------------------------------------------------------------

TrainLog train(const TrainTask& task, const ArsConfig& cfg, std::uint64_t seed,
               const Vec& theta0) {
  cfg.validate();
  require(task.batch_cost != nullptr, "train: task needs a batch cost");
  require(theta0.size() == task.param_count, "train: parameter count mismatch");
  require(task.base_test_cost > 0.0, "train: base cost must be positive");

  TrainLog log;
  log.base_cost = task.base_test_cost;
  const std::uint64_t eval_key = eval_suite_key(task);
  Vec theta = theta0;

  {
    const double t0 = now_ms();
    const double test0 = task.batch_cost(theta, eval_key, cfg.test_batch);
    TrainRecord r;
    r.epoch = 0;
    r.train_cost = test0;  // cost at the initial point; no training suite yet
    r.test_cost = test0;
    r.normalized_test_cost = test0 / log.base_cost;
    r.grad_norm = 0.0;
    r.lr = cfg.learning_rate;
    r.wall_ms = now_ms() - t0;
    r.rng_digest = mix64(eval_key);
    log.records.push_back(r);
    log.best_params = theta;
    log.best_test_cost = test0;
    log.best_epoch = 0;
  }

  Vec m = Vec::Zero(theta.size());
  Vec v = Vec::Zero(theta.size());
  Vec mhat(theta.size()), vhat(theta.size()), step(theta.size()), cand(theta.size());
  const int drop_at = cfg.lr_drop_epoch();

  for (int k = 0; k < cfg.epochs; ++k) {
    const double t0 = now_ms();
    const double lr =
        cfg.learning_rate * (k >= drop_at ? cfg.lr_drop_factor : 1.0);
    const std::uint64_t train_key =
        derive_stream(seed, {stream_id::kTrainSuite, static_cast<std::uint64_t>(k)});
    const std::uint64_t dir_key =
        derive_stream(seed, {stream_id::kSearchDirections, static_cast<std::uint64_t>(k)});
    RngStream directions(dir_key);

    auto objective = [&](const Vec& p) { return task.batch_cost(p, train_key, cfg.train_batch); };
    ArsGradient est = ars_gradient(objective, theta, cfg.sigma, cfg.num_directions, directions);
    const double raw_norm = est.grad.norm();
    clip_l2(est.grad, cfg.grad_clip);

    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * est.grad;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * est.grad.cwiseProduct(est.grad);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, k + 1);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, k + 1);
    mhat = m / bc1;
    vhat = v / bc2;
    step = lr * (mhat.array() / (vhat.array().sqrt() + cfg.adam_eps)).matrix();

    cand = theta - step;
    if (!cand.allFinite()) {
      log.events.push_back({k + 1, "non-finite update rolled back; retrying at half step"});
      cand = theta - 0.5 * step;
      if (!cand.allFinite()) {
        log.events.push_back({k + 1, "half-step update still non-finite; keeping parameters"});
        cand = theta;
      }
    }
    theta = cand;

    const double test = task.batch_cost(theta, eval_key, cfg.test_batch);
    TrainRecord r;
    r.epoch = k + 1;
    r.train_cost = est.mean_cost;
    r.test_cost = test;
    r.normalized_test_cost = test / log.base_cost;
    r.grad_norm = raw_norm;
    r.lr = lr;
    r.wall_ms = now_ms() - t0;
    r.rng_digest = mix64(train_key ^ mix64(dir_key) ^ mix64(eval_key));
    log.records.push_back(r);

    if (test < log.best_test_cost) {
      log.best_test_cost = test;
      log.best_params = theta;
      log.best_epoch = k + 1;
    }
  }

  log.final_params = theta;
  return log;
}

// ----------------------------------------------------------------------------
// Campaign.
// ----------------------------------------------------------------------------

int CampaignResult::completed() const {
  int n = 0;
  for (const SeedRun& r : runs) {
    if (r.ok) ++n;
  }
  return n;
}

std::vector<std::array<double, 3>> CampaignResult::normalized_band() const {
  std::size_t epochs = std::numeric_limits<std::size_t>::max();
  bool any = false;
  for (const SeedRun& r : runs) {
    if (!r.ok) continue;
    epochs = std::min(epochs, r.log.records.size());
    any = true;
  }
  if (!any) return {};
  std::vector<std::array<double, 3>> band(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    int n = 0;
    for (const SeedRun& r : runs) {
      if (!r.ok) continue;
      const double c = r.log.records[e].normalized_test_cost;
      sum += c;
      lo = std::min(lo, c);
      hi = std::max(hi, c);
      ++n;
    }
    band[e] = {sum / n, lo, hi};
  }
  return band;
}

std::vector<double> CampaignResult::final_normalized() const {
  std::vector<double> out;
  for (const SeedRun& r : runs) {
    if (r.ok && !r.log.records.empty())
      out.push_back(r.log.records.back().normalized_test_cost);
  }
  return out;
}

std::vector<double> CampaignResult::best_normalized() const {
  std::vector<double> out;
  for (const SeedRun& r : runs) {
    if (r.ok) out.push_back(r.log.best_test_cost / r.log.base_cost);
  }
  return out;
}

CampaignResult multi_seed_campaign(const TrainTask& task, const ArsConfig& cfg,
                                   const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), "campaign: need at least one seed");
  require(task.init_params != nullptr, "campaign: task needs an initializer");
  CampaignResult result;
  result.runs.resize(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SeedRun& run = result.runs[i];
    run.seed = seeds[i];
    try {
      run.log = train(task, cfg, seeds[i], task.init_params(seeds[i]));
      run.ok = true;
    } catch (const std::exception& ex) {
      run.ok = false;
      run.error = ex.what();
    }
  }
  return result;
}

}  // namespace ywb
