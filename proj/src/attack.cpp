#include "ywb/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ywb/parallel.hpp"
#include "ywb/rng.hpp"

namespace ywb {

namespace {

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("attack." + field + ": " + what);
}

bool inside_box(const Vec& x, const Vec& lo, const Vec& hi) {
  if (!x.allFinite()) return false;
  if (lo.size() == 0) return true;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  }
  return true;
}

// Scales each per-step offset onto the epsilon ball.
void project_ball(std::vector<Vec>& a, double eps) {
  for (Vec& v : a) {
    const double n = v.norm();
    if (n > eps) v *= eps / n;
  }
}

}  // namespace

void AttackConfig::validate() const {
  check(epsilon >= 0.0 && std::isfinite(epsilon), "epsilon", "must be non-negative");
  check(window >= 1, "window", "must be at least 1");
  check(iters >= 0, "iters", "must be non-negative");
  check(batch >= 1, "batch", "must be at least 1");
  check(tail_fraction > 0.0 && tail_fraction <= 1.0, "tail_fraction", "must be in (0, 1]");
}

// ----------------------------------------------------------------------------
// Fixed-offset rollout (mirrors the clean rollout step for step).
// ----------------------------------------------------------------------------

AttackedRollout attacked_rollout(const Env& env, const Policy& prototype, const Vec& x0,
                                 std::uint64_t noise_key, const std::vector<Vec>& offsets,
                                 double tail_fraction) {
  const RolloutOptions options = env.rollout_options();
  const int T = options.horizon;
  const Index n = env.state_dim(), m = env.input_dim(), p = env.output_dim();
  require(x0.size() == n, "attacked rollout: x0 dimension mismatch");

  AttackedRollout out;
  Trajectory& traj = out.trajectory;
  traj.states.reserve(T + 1);
  traj.inputs.reserve(T);
  traj.outputs.reserve(T);
  traj.step_costs.reserve(T);
  out.offsets.assign(T, Vec::Zero(p));

  RngStream rng(noise_key);
  Vec x = x0, v(p), w(n), y(p), u(m), xn(n);
  const Vec r0 = Vec::Zero(m);
  const Vec zero_u = Vec::Zero(m), zero_y = Vec::Zero(p);

  auto policy = prototype.clone();
  policy->reset();
  traj.states.push_back(x);

  for (int t = 0; t < T; ++t) {
    if (traj.diverged) {
      traj.states.push_back(x);
      traj.inputs.push_back(zero_u);
      traj.outputs.push_back(zero_y);
      traj.step_costs.push_back(options.divergence_penalty);
      continue;
    }
    rng.fill_scaled_gaussian(env.measurement_std(), v);
    env.measure(x, y);
    y += v;
    if (t < static_cast<int>(offsets.size()) && offsets[t].size() == p) {
      out.offsets[t] = offsets[t];
      y += offsets[t];
    }
    policy->step(y, r0, u);
    if (!u.allFinite()) {
      traj.diverged = true;
      traj.diverged_at = t;
      traj.states.push_back(x);
      traj.inputs.push_back(zero_u);
      traj.outputs.push_back(y);
      traj.step_costs.push_back(options.divergence_penalty);
      continue;
    }
    traj.inputs.push_back(u);
    traj.outputs.push_back(y);
    traj.step_costs.push_back(options.step_cost ? options.step_cost(x, u) : 0.0);
    rng.fill_scaled_gaussian(env.process_std(), w);
    env.step_nominal(x, u, xn);
    xn += w;
    if (!inside_box(xn, options.box_lo, options.box_hi)) {
      traj.diverged = true;
      traj.diverged_at = t + 1;
      if (!xn.allFinite()) xn = x;
    }
    x = xn;
    traj.states.push_back(x);
  }
  out.deviation = env.tracking_deviation(traj, tail_fraction);
  return out;
}

// ----------------------------------------------------------------------------
// Receding-horizon synthesis.
// ----------------------------------------------------------------------------

AttackedRollout synthesize_attack(const Env& env, const Policy& prototype, const Vec& x0,
                                  std::uint64_t noise_key, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0) {
    return attacked_rollout(env, prototype, x0, noise_key, {}, cfg.tail_fraction);
  }
  const RolloutOptions options = env.rollout_options();
  const int T = options.horizon;
  const int W = cfg.window;
  const Index n = env.state_dim(), m = env.input_dim(), p = env.output_dim();
  require(x0.size() == n, "attack synthesis: x0 dimension mismatch");

  // Freeze the noise realization up front (same draw order as the rollout:
  // measurement vector, then process vector, per step).
  std::vector<Vec> vs(T, Vec(p)), ws(T, Vec(n));
  {
    RngStream rng(noise_key);
    for (int t = 0; t < T; ++t) {
      rng.fill_scaled_gaussian(env.measurement_std(), vs[t]);
      rng.fill_scaled_gaussian(env.process_std(), ws[t]);
    }
  }
  RngStream search(derive_stream(noise_key, {stream_id::kAttack}));

  AttackedRollout out;
  Trajectory& traj = out.trajectory;
  traj.states.reserve(T + 1);
  traj.inputs.reserve(T);
  traj.outputs.reserve(T);
  traj.step_costs.reserve(T);
  out.offsets.assign(T, Vec::Zero(p));

  Vec x = x0, y(p), u(m), xn(n);
  const Vec r0 = Vec::Zero(m);
  const Vec zero_u = Vec::Zero(m), zero_y = Vec::Zero(p);
  auto policy = prototype.clone();
  policy->reset();
  traj.states.push_back(x);

  // Scores a window of offsets from the current snapshot.
  Vec sy(p), su(m), sxn(n);
  auto score_window = [&](const std::vector<Vec>& a, int t) {
    auto pol = policy->clone();
    Vec sx = x;
    double total = 0.0;
    bool dead = false;
    const int L = std::min(W, T - t);
    for (int s = 0; s < L; ++s) {
      if (dead) {
        total += options.divergence_penalty;
        continue;
      }
      const int g = t + s;
      env.measure(sx, sy);
      sy += vs[g];
      sy += a[s];
      pol->step(sy, r0, su);
      if (!su.allFinite()) {
        dead = true;
        total += options.divergence_penalty;
        continue;
      }
      total += options.step_cost ? options.step_cost(sx, su) : 0.0;
      env.step_nominal(sx, su, sxn);
      sxn += ws[g];
      if (!inside_box(sxn, options.box_lo, options.box_hi)) dead = true;
      if (sxn.allFinite()) sx = sxn;
    }
    return total;
  };

  std::vector<Vec> warm(W, Vec::Zero(p));
  std::vector<Vec> cand(W, Vec(p)), plus(W, Vec(p)), minus(W, Vec(p));
  std::vector<Vec> best(W, Vec(p));
  std::vector<Vec> delta(W, Vec(p));
  const std::vector<Vec> zero(W, Vec::Zero(p));

  for (int t = 0; t < T; ++t) {
    if (traj.diverged) {
      traj.states.push_back(x);
      traj.inputs.push_back(zero_u);
      traj.outputs.push_back(zero_y);
      traj.step_costs.push_back(options.divergence_penalty);
      continue;
    }

    // Optimize the window starting at t; the zero offset is always in the
    // candidate set so the attack can never score below the clean window.
    double best_score = score_window(zero, t);
    best = zero;
    cand = warm;
    project_ball(cand, cfg.epsilon);
    {
      const double s = score_window(cand, t);
      if (s > best_score) {
        best_score = s;
        best = cand;
      }
    }
    for (int k = 0; k < cfg.iters; ++k) {
      const double radius = 0.4 * cfg.epsilon / std::sqrt(k + 1.0);
      for (int s = 0; s < W; ++s) {
        for (Index j = 0; j < p; ++j)
          delta[s](j) = (search.next_u64() & 1u) ? radius : -radius;
      }
      for (int s = 0; s < W; ++s) {
        plus[s] = cand[s] + delta[s];
        minus[s] = cand[s] - delta[s];
      }
      project_ball(plus, cfg.epsilon);
      project_ball(minus, cfg.epsilon);
      const double sp = score_window(plus, t);
      const double sm = score_window(minus, t);
      if (sp > best_score) {
        best_score = sp;
        best = plus;
      }
      if (sm > best_score) {
        best_score = sm;
        best = minus;
      }
      cand = (sp >= sm) ? plus : minus;
    }

    const Vec a_t = best[0];
    // Warm start for the next step: shift the window by one.
    for (int s = 0; s + 1 < W; ++s) warm[s] = best[s + 1];
    warm[W - 1] = best[W - 1];

    // Apply the chosen offset and advance the real loop.
    env.measure(x, y);
    y += vs[t];
    y += a_t;
    out.offsets[t] = a_t;
    policy->step(y, r0, u);
    if (!u.allFinite()) {
      traj.diverged = true;
      traj.diverged_at = t;
      traj.states.push_back(x);
      traj.inputs.push_back(zero_u);
      traj.outputs.push_back(y);
      traj.step_costs.push_back(options.divergence_penalty);
      continue;
    }
    traj.inputs.push_back(u);
    traj.outputs.push_back(y);
    traj.step_costs.push_back(options.step_cost ? options.step_cost(x, u) : 0.0);
    env.step_nominal(x, u, xn);
    xn += ws[t];
    if (!inside_box(xn, options.box_lo, options.box_hi)) {
      traj.diverged = true;
      traj.diverged_at = t + 1;
      if (!xn.allFinite()) xn = x;
    }
    x = xn;
    traj.states.push_back(x);
  }
  out.deviation = env.tracking_deviation(traj, cfg.tail_fraction);
  return out;
}

// ----------------------------------------------------------------------------
// Batched evaluation.
// ----------------------------------------------------------------------------

AttackSummary evaluate_attack(const Env& env, const Policy& prototype, const AttackConfig& cfg,
                              double normalizer) {
  cfg.validate();
  AttackSummary sum;
  sum.epsilon = cfg.epsilon;
  sum.batch = cfg.batch;

  const std::uint64_t suite = derive_stream(cfg.seed, {stream_id::kAttack});
  std::vector<Vec> ics(cfg.batch);
  std::vector<std::uint64_t> keys(cfg.batch);
  for (int i = 0; i < cfg.batch; ++i) {
    RngStream icr(derive_stream(suite, {stream_id::kInitialState, static_cast<std::uint64_t>(i)}));
    ics[i] = env.sample_initial_state(icr);
    keys[i] = derive_stream(suite, {stream_id::kRolloutNoise, static_cast<std::uint64_t>(i)});
  }

  std::vector<double> attacked_cost(cfg.batch), clean_cost(cfg.batch), deviation(cfg.batch);
  parallel_for(cfg.batch, [&](int i) {
    const AttackedRollout atk = synthesize_attack(env, prototype, ics[i], keys[i], cfg);
    attacked_cost[i] = atk.trajectory.total_cost();
    deviation[i] = atk.deviation;
    if (cfg.epsilon == 0.0) {
      clean_cost[i] = attacked_cost[i];
    } else {
      const AttackedRollout clean =
          attacked_rollout(env, prototype, ics[i], keys[i], {}, cfg.tail_fraction);
      clean_cost[i] = clean.trajectory.total_cost();
    }
  });

  for (int i = 0; i < cfg.batch; ++i) {
    sum.mean_cost += attacked_cost[i];
    sum.clean_cost += clean_cost[i];
    sum.mean_deviation += deviation[i];
  }
  sum.mean_cost /= cfg.batch;
  sum.clean_cost /= cfg.batch;
  sum.mean_deviation /= cfg.batch;
  const double denom = normalizer > 0.0 ? normalizer : sum.clean_cost;
  sum.mean_norm_cost = denom > 0.0 ? sum.mean_cost / denom : sum.mean_cost;
  sum.criterion_hit = sum.mean_deviation > env.attack_threshold();
  return sum;
}

// ----------------------------------------------------------------------------
// Critical budget search.
// ----------------------------------------------------------------------------

namespace {

SweepPoint to_point(const AttackSummary& s) {
  return {s.epsilon, s.mean_cost, s.mean_norm_cost, s.mean_deviation, s.criterion_hit};
}

}  // namespace

CriticalAttackResult critical_attack_size(const Env& env, const Policy& prototype,
                                          const AttackConfig& cfg, double eps_lo, double eps_hi,
                                          int bisect_iters, double normalizer,
                                          int max_expansions) {
  require(eps_lo >= 0.0 && eps_hi > eps_lo, "critical attack: need 0 <= eps_lo < eps_hi");
  require(bisect_iters >= 1, "critical attack: need at least one bisection step");
  CriticalAttackResult res;

  auto eval_at = [&](double eps) {
    AttackConfig c = cfg;
    c.epsilon = eps;
    res.evaluations.push_back(to_point(evaluate_attack(env, prototype, c, normalizer)));
    return res.evaluations.back();
  };
  const double threshold = env.attack_threshold();
  // Deviation measurements are noisy in the budget; use a running-max
  // envelope so the hit predicate is monotone in epsilon.
  auto envelope_hit = [&](double eps) {
    double dev = 0.0;
    for (const SweepPoint& pt : res.evaluations) {
      if (pt.epsilon <= eps) dev = std::max(dev, pt.mean_deviation);
    }
    return dev > threshold;
  };

  eval_at(eps_lo);
  if (envelope_hit(eps_lo)) {
    res.censored_low = true;
    res.lo = res.hi = eps_lo;
    res.critical_epsilon = eps_lo;
    return res;
  }
  eval_at(eps_hi);
  int expansions = max_expansions;
  while (!envelope_hit(eps_hi) && expansions-- > 0) {
    eps_hi *= 2.0;
    eval_at(eps_hi);
  }
  if (!envelope_hit(eps_hi)) {
    res.censored_high = true;
    res.lo = res.hi = eps_hi;
    res.critical_epsilon = eps_hi;
    return res;
  }

  double lo = eps_lo, hi = eps_hi;
  for (int k = 0; k < bisect_iters; ++k) {
    const double mid = 0.5 * (lo + hi);
    eval_at(mid);
    if (envelope_hit(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  res.lo = lo;
  res.hi = hi;
  res.critical_epsilon = 0.5 * (lo + hi);
  return res;
}

// ----------------------------------------------------------------------------
// Open-loop policy gain.
// ----------------------------------------------------------------------------

double empirical_policy_gain(const Policy& prototype, const std::vector<Vec>& baseline_y,
                             int probes, std::uint64_t seed, double probe_scale) {
  require(!baseline_y.empty(), "policy gain: baseline measurements required");
  require(probes >= 1, "policy gain: need at least one probe");
  require(probe_scale > 0.0, "policy gain: probe scale must be positive");
  const Index p = baseline_y[0].size();
  const int T = static_cast<int>(baseline_y.size());
  const Vec r0 = Vec::Zero(prototype.output_dim());

  double gain = 0.0;
  Vec a(p), ua(prototype.output_dim()), ub(prototype.output_dim()), yb(p);
  for (int i = 0; i < probes; ++i) {
    RngStream rng(derive_stream(seed, {stream_id::kAttack, 2u, static_cast<std::uint64_t>(i)}));
    auto pa = prototype.clone();
    auto pb = prototype.clone();
    pa->reset();
    pb->reset();
    double num2 = 0.0, den2 = 0.0;
    for (int t = 0; t < T; ++t) {
      rng.fill_gaussian(a);
      const double nrm = a.norm();
      const double radius = probe_scale * rng.next_uniform(0.25, 1.0);
      if (nrm > 0.0) a *= radius / nrm;
      pa->step(baseline_y[t], r0, ua);
      yb = baseline_y[t] + a;
      pb->step(yb, r0, ub);
      num2 += (ua - ub).squaredNorm();
      den2 += a.squaredNorm();
    }
    if (den2 > 1e-24) gain = std::max(gain, std::sqrt(num2 / den2));
  }
  return gain;
}

}  // namespace ywb
