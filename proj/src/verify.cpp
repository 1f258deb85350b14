#include "ywb/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ywb/policy.hpp"
#include "ywb/rng.hpp"

namespace ywb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Piecewise-constant random excitation bounded by `bound`, held `hold` steps.
std::vector<Vec> random_hold_inputs(RngStream& rng, int horizon, Index dim, double bound,
                                    int hold) {
  std::vector<Vec> inputs(horizon, Vec::Zero(dim));
  Vec level = Vec::Zero(dim);
  for (int t = 0; t < horizon; ++t) {
    if (t % hold == 0) {
      for (Index j = 0; j < dim; ++j) level(j) = bound * rng.next_uniform(-1.0, 1.0);
    }
    inputs[t] = level;
  }
  return inputs;
}

// Truncated l2 norm of a vector sequence difference.
double sequence_gap(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  require(a.size() == b.size(), "audit: sequence length mismatch");
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) s += (a[t] - b[t]).squaredNorm();
  return std::sqrt(s);
}

std::vector<double> state_distances(const AuditTrace& ta, const AuditTrace& tb) {
  require(ta.states.size() == tb.states.size(), "audit: trace length mismatch");
  std::vector<double> d(ta.states.size());
  for (std::size_t t = 0; t < d.size(); ++t) d[t] = (ta.states[t] - tb.states[t]).norm();
  return d;
}

}  // namespace

// ----------------------------------------------------------------------------
// Audit system constructors.
// ----------------------------------------------------------------------------

AuditSystem make_map_audit(Index state_dim, Index input_dim, Index output_dim,
                           std::function<void(const Vec&, const Vec&, Vec&)> step,
                           std::function<void(const Vec&, const Vec&, Vec&)> out) {
  AuditSystem sys;
  sys.state_dim = state_dim;
  sys.input_dim = input_dim;
  sys.output_dim = output_dim;
  sys.simulate = [=](const Vec& x0, const std::vector<Vec>& inputs, AuditTrace& trace) {
    require(x0.size() == state_dim, "map audit: initial state size mismatch");
    const int T = static_cast<int>(inputs.size());
    trace.states.assign(T + 1, Vec());
    trace.outputs.assign(T, Vec());
    Vec x = x0, xn(state_dim);
    trace.states[0] = x;
    for (int t = 0; t < T; ++t) {
      require(inputs[t].size() == input_dim, "map audit: input size mismatch");
      trace.outputs[t].resize(output_dim);
      out(x, inputs[t], trace.outputs[t]);
      step(x, inputs[t], xn);
      x = xn;
      trace.states[t + 1] = x;
    }
  };
  return sys;
}

AuditSystem make_sequence_model_audit(const SequenceModel& prototype) {
  AuditSystem sys;
  sys.state_dim = prototype.state_dim();
  sys.input_dim = prototype.input_dim();
  sys.output_dim = prototype.output_dim();
  sys.simulate = [&prototype](const Vec& x0, const std::vector<Vec>& inputs, AuditTrace& trace) {
    auto model = prototype.clone();
    model->reset();
    model->set_state(x0);
    const int T = static_cast<int>(inputs.size());
    trace.states.assign(T + 1, Vec());
    trace.outputs.assign(T, Vec());
    model->get_state(trace.states[0]);
    for (int t = 0; t < T; ++t) {
      trace.outputs[t].resize(model->output_dim());
      model->step(inputs[t], trace.outputs[t]);
      model->get_state(trace.states[t + 1]);
    }
  };
  return sys;
}

AuditSystem make_observer_audit(const Env& env, const HighGainObserver& observer) {
  AuditSystem sys;
  const Index n = env.state_dim();
  const Index m = env.input_dim();
  const Index p = env.output_dim();
  sys.state_dim = n;
  sys.input_dim = m + p;
  sys.output_dim = env.embed_dim();
  sys.simulate = [&env, &observer, n, m, p](const Vec& x0, const std::vector<Vec>& inputs,
                                            AuditTrace& trace) {
    require(x0.size() == n, "observer audit: initial state size mismatch");
    const int T = static_cast<int>(inputs.size());
    trace.states.assign(T + 1, Vec());
    trace.outputs.assign(T, Vec());
    Vec xhat = x0, next(n);
    const Index edim = env.embed_dim();
    trace.states[0].resize(edim);
    env.embed(xhat, trace.states[0]);
    for (int t = 0; t < T; ++t) {
      require(inputs[t].size() == m + p, "observer audit: input size mismatch");
      trace.outputs[t] = trace.states[t];
      observer.predict(xhat, inputs[t].head(m), inputs[t].tail(p), next);
      xhat = next;
      trace.states[t + 1].resize(edim);
      env.embed(xhat, trace.states[t + 1]);
    }
  };
  return sys;
}

AuditSystem make_closed_loop_audit(const Env& env, const Policy& prototype,
                                   std::uint64_t noise_key, bool with_noise) {
  AuditSystem sys;
  const Index n = env.state_dim();
  auto probe = prototype.clone();
  probe->reset();
  const Index k = probe->internal_dim();
  const Index ke = probe->embedded_internal_dim();
  const Index edim = env.embed_dim();
  sys.state_dim = n + k;
  sys.input_dim = env.input_dim();
  sys.output_dim = edim;
  sys.simulate = [&env, &prototype, noise_key, with_noise, n, k, ke,
                  edim](const Vec& x0, const std::vector<Vec>& inputs, AuditTrace& trace) {
    require(x0.size() == n + k, "closed-loop audit: initial state size mismatch");
    auto policy = prototype.clone();
    policy->reset();
    if (k > 0) policy->set_internal(x0.tail(k));

    RngStream rng(noise_key);
    Vec x = x0.head(n);
    const int T = static_cast<int>(inputs.size());
    trace.states.assign(T + 1, Vec());
    trace.outputs.assign(T, Vec());
    Vec v(env.output_dim()), w(n), y(env.output_dim()), u(env.input_dim()), xn(n);
    Vec e(edim), pint(ke);
    auto record = [&](int t) {
      Vec& s = trace.states[t];
      s.resize(edim + ke);
      env.embed(x, e);
      s.head(edim) = e;
      if (ke > 0) {
        policy->embed_internal(pint);
        s.tail(ke) = pint;
      }
    };
    record(0);
    for (int t = 0; t < T; ++t) {
      require(inputs[t].size() == env.input_dim(), "closed-loop audit: input size mismatch");
      if (with_noise) {
        rng.fill_scaled_gaussian(env.measurement_std(), v);
      } else {
        v.setZero();
      }
      env.measure(x, y);
      y += v;
      policy->step(y, inputs[t], u);
      trace.outputs[t].resize(edim);
      env.embed(x, trace.outputs[t]);
      if (with_noise) {
        rng.fill_scaled_gaussian(env.process_std(), w);
      } else {
        w.setZero();
      }
      u += inputs[t];  // plant input is policy output plus excitation
      env.step_nominal(x, u, xn);
      xn += w;
      x = xn;
      record(t + 1);
    }
  };
  return sys;
}

// ----------------------------------------------------------------------------
// Rate fitting.
// ----------------------------------------------------------------------------

PairFit fit_decay_rate(const std::vector<double>& d, const RateFitOptions& opt) {
  PairFit fit;
  require(d.size() >= 2, "rate fit: need at least two distances");
  for (double v : d) {
    if (!std::isfinite(v)) {
      fit.rate = kInf;
      fit.r2 = 0.0;
      return fit;
    }
  }
  const int T = static_cast<int>(d.size()) - 1;
  fit.d0 = d[0];
  int peak_t = 0;
  double peak = d[0], dmin = d[0];
  for (int t = 0; t <= T; ++t) {
    if (d[t] > peak) {
      peak = d[t];
      peak_t = t;
    }
    dmin = std::min(dmin, d[t]);
  }
  fit.d_min = dmin;

  const double tiny = std::max(opt.window_lo, 10.0 * opt.floor);
  // Reference scale for the fit window: the initial separation, or the peak
  // separation for probes that start identical and are driven apart.
  const double ref = (fit.d0 > tiny) ? fit.d0 : peak;
  if (ref <= tiny) {
    fit.degenerate = true;
    fit.rate = 0.0;
    fit.r2 = 1.0;
    fit.overshoot = 1.0;
    fit.decayed = true;
    return fit;
  }
  const double hi = ref * opt.window_hi_frac;

  std::vector<std::pair<double, double>> pts;  // (t, log d)
  int first_below = -1;
  for (int t = peak_t + 1; t <= T; ++t) {
    if (d[t] >= opt.window_lo && d[t] <= hi) pts.emplace_back(t, std::log(d[t]));
    if (d[t] < opt.window_lo && first_below < 0) first_below = t;
  }
  fit.decayed = dmin <= hi;
  fit.points = static_cast<int>(pts.size());

  if (fit.points < opt.min_points) {
    if (fit.decayed && first_below > 0) {
      // Crossed the numerical floor before a fit window formed: bound the
      // rate by the geometric mean to the first crossing.
      fit.fast = true;
      const double target = std::max(d[first_below], opt.floor);
      fit.rate = std::pow(target / ref, 1.0 / first_below);
      fit.r2 = 1.0;
      fit.overshoot = 1.0;
      return fit;
    }
    // No usable decay window: regress over everything above the floor so the
    // report still carries a (failing) trend.
    pts.clear();
    for (int t = 0; t <= T; ++t) {
      if (d[t] > opt.floor) pts.emplace_back(t, std::log(d[t]));
    }
    fit.points = static_cast<int>(pts.size());
    if (fit.points < 2) {
      fit.rate = kInf;
      fit.r2 = 0.0;
      return fit;
    }
  }

  double st = 0, sy = 0, stt = 0, sty = 0, syy = 0;
  const double np = static_cast<double>(pts.size());
  for (const auto& [t, ld] : pts) {
    st += t;
    sy += ld;
    stt += t * t;
    sty += t * ld;
    syy += ld * ld;
  }
  const double denom = np * stt - st * st;
  if (std::abs(denom) < 1e-12) {
    fit.rate = kInf;
    fit.r2 = 0.0;
    return fit;
  }
  const double slope = (np * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / np;
  double ss_res = 0.0;
  const double mean_y = sy / np;
  double ss_tot = 0.0;
  for (const auto& [t, ld] : pts) {
    const double pred = intercept + slope * t;
    ss_res += (ld - pred) * (ld - pred);
    ss_tot += (ld - mean_y) * (ld - mean_y);
  }
  fit.rate = std::exp(slope);
  fit.r2 = (ss_tot < 1e-16) ? 1.0 : 1.0 - ss_res / ss_tot;

  // Empirical overshoot relative to ref * rate^t, up to the end of the window.
  const int t_end = static_cast<int>(pts.back().first);
  double beta = 1.0;
  if (fit.rate > 0.0 && std::isfinite(fit.rate)) {
    double geo = ref;
    for (int t = 1; t <= t_end; ++t) {
      geo *= fit.rate;
      if (geo > 0.0) beta = std::max(beta, d[t] / geo);
    }
  }
  fit.overshoot = beta;
  return fit;
}

// ----------------------------------------------------------------------------
// Contraction audit.
// ----------------------------------------------------------------------------

ContractionReport audit_contraction(const AuditSystem& sys,
                                    const std::function<AuditPair(int)>& make_pair, int pairs,
                                    const RateFitOptions& opt) {
  require(pairs > 0, "contraction audit: need at least one pair");
  ContractionReport rep;
  rep.fits.reserve(pairs);
  AuditTrace ta, tb;
  for (int i = 0; i < pairs; ++i) {
    const AuditPair pair = make_pair(i);
    sys.simulate(pair.x0a, pair.inputs, ta);
    sys.simulate(pair.x0b, pair.inputs, tb);
    rep.fits.push_back(fit_decay_rate(state_distances(ta, tb), opt));
  }

  double rate_max = 0.0, over_max = 0.0;
  double fit_min = kInf, fit_max = 0.0;
  for (const PairFit& f : rep.fits) {
    if (f.degenerate) {
      ++rep.degenerate;
      continue;
    }
    rate_max = std::max(rate_max, f.rate);
    over_max = std::max(over_max, f.overshoot);
    if (f.fast) {
      ++rep.fast;
      continue;
    }
    ++rep.fitted;
    rep.min_r2 = std::min(rep.min_r2, f.r2);
    fit_min = std::min(fit_min, f.rate);
    fit_max = std::max(fit_max, f.rate);
  }
  rep.rate = rate_max;
  rep.overshoot = over_max;
  if (rep.fitted >= 2 && fit_min > 0.0) rep.dispersion = fit_max / fit_min;

  if (rep.degenerate == pairs) {
    rep.all_degenerate = true;
    rep.pass = true;
    return rep;
  }
  rep.pass = true;
  for (const PairFit& f : rep.fits) {
    if (f.degenerate) continue;
    if (!f.decayed) {
      rep.pass = false;
      rep.failure = "no decay into the fit window";
      break;
    }
    if (!(f.rate < 1.0)) {
      rep.pass = false;
      rep.failure = "fitted rate not below one";
      break;
    }
    if (!f.fast && f.r2 < opt.min_r2) {
      rep.pass = false;
      rep.failure = "poor exponential fit";
      break;
    }
  }
  if (rep.pass && rep.fitted >= 2 && rep.dispersion > opt.dispersion_bound) {
    rep.pass = false;
    rep.failure = "fitted rates not uniform across pairs";
  }
  return rep;
}

// ----------------------------------------------------------------------------
// Gain audit.
// ----------------------------------------------------------------------------

GainReport audit_gain(const AuditSystem& sys, const std::function<GainProbe(int)>& make_probe,
                      int probes) {
  require(probes > 0, "gain audit: need at least one probe");
  GainReport rep;
  rep.finite = true;
  AuditTrace ta, tb;
  for (int i = 0; i < probes; ++i) {
    const GainProbe probe = make_probe(i);
    sys.simulate(probe.x0a, probe.inputs_a, ta);
    sys.simulate(probe.x0b, probe.inputs_b, tb);
    for (const Vec& z : ta.outputs) {
      if (!z.allFinite()) rep.finite = false;
    }
    for (const Vec& z : tb.outputs) {
      if (!z.allFinite()) rep.finite = false;
    }
    if (!rep.finite) return rep;
    const double din = sequence_gap(probe.inputs_a, probe.inputs_b);
    const double dout = sequence_gap(ta.outputs, tb.outputs);
    if (din < 1e-15) {
      rep.offset = std::max(rep.offset, dout);
      ++rep.offset_probes;
    } else {
      rep.gain = std::max(rep.gain, dout / din);
      ++rep.gain_probes;
    }
  }
  rep.finite = std::isfinite(rep.gain) && std::isfinite(rep.offset);
  return rep;
}

// ----------------------------------------------------------------------------
// Boundedness audit.
// ----------------------------------------------------------------------------

BoundednessReport audit_boundedness(const AuditSystem& sys, const Vec& x0,
                                    const std::vector<Vec>& inputs, double trend_tol) {
  BoundednessReport rep;
  AuditTrace trace;
  sys.simulate(x0, inputs, trace);
  const int N = static_cast<int>(trace.states.size());
  rep.finite = true;
  double q3 = 0.0, q4 = 0.0;
  const int h = N / 2, q = N / 4;
  int n3 = 0, n4 = 0;
  for (int t = 0; t < N; ++t) {
    const Vec& s = trace.states[t];
    if (!s.allFinite()) rep.finite = false;
    const double nrm = s.norm();
    rep.sup_norm = std::max(rep.sup_norm, nrm);
    if (t >= h && t < h + q) {
      q3 += nrm;
      ++n3;
    } else if (t >= h + q) {
      q4 += nrm;
      ++n4;
    }
  }
  if (n3 > 0) q3 /= n3;
  if (n4 > 0) q4 /= n4;
  rep.trend = (q4 - q3) / std::max(q3, 1e-9);
  rep.final_state = trace.states.back();
  rep.pass = rep.finite && rep.trend <= trend_tol;
  return rep;
}

// ----------------------------------------------------------------------------
// Convergence under exponentially converging inputs.
// ----------------------------------------------------------------------------

ConvergenceReport audit_convergence(const AuditSystem& sys, const GainProbe& probe,
                                    double input_rate, double declared_rate, double margin,
                                    const RateFitOptions& opt) {
  ConvergenceReport rep;
  rep.rate_bound = std::max(declared_rate, input_rate) + margin;
  AuditTrace ta, tb;
  sys.simulate(probe.x0a, probe.inputs_a, ta);
  sys.simulate(probe.x0b, probe.inputs_b, tb);
  rep.state_fit = fit_decay_rate(state_distances(ta, tb), opt);
  require(ta.outputs.size() == tb.outputs.size(), "convergence audit: output length mismatch");
  std::vector<double> dout(ta.outputs.size());
  for (std::size_t t = 0; t < dout.size(); ++t) dout[t] = (ta.outputs[t] - tb.outputs[t]).norm();
  rep.output_fit = fit_decay_rate(dout, opt);

  auto ok = [&](const PairFit& f) {
    if (f.degenerate) return true;
    if (!f.decayed) return false;
    if (!f.fast && f.r2 < opt.min_r2) return false;
    return f.rate <= rep.rate_bound;
  };
  rep.pass = ok(rep.state_fit) && ok(rep.output_fit);
  return rep;
}

// ----------------------------------------------------------------------------
// Environment-level audits.
// ----------------------------------------------------------------------------

ClosedLoopAuditReport audit_closed_loop(const Env& env, const Policy& prototype,
                                        std::uint64_t seed, const ClosedLoopAuditOptions& opt) {
  ClosedLoopAuditReport rep;
  const std::uint64_t noise_key = derive_stream(seed, {stream_id::kAudit, 0xC10Bu});
  const AuditSystem sys = make_closed_loop_audit(env, prototype, noise_key, opt.with_noise);

  auto probe = prototype.clone();
  probe->reset();
  Vec internal0;
  probe->get_internal(internal0);
  Vec pscale;
  probe->internal_perturbation_scale(pscale);
  const Index n = env.state_dim();
  const Index k = internal0.size();
  const double rbar = env.input_excitation_bound();

  auto sample_state = [&](RngStream& rng, bool perturb_internal) {
    Vec x0(n + k);
    x0.head(n) = env.sample_initial_state(rng);
    for (Index j = 0; j < k; ++j) {
      const double off =
          perturb_internal ? opt.internal_perturbation * pscale(j) * rng.next_gaussian() : 0.0;
      x0(n + j) = internal0(j) + off;
    }
    return x0;
  };

  auto make_pair = [&](int i) {
    RngStream rng(derive_stream(seed, {stream_id::kAudit, 1u, static_cast<std::uint64_t>(i)}));
    AuditPair pair;
    pair.x0a = sample_state(rng, true);
    pair.x0b = sample_state(rng, true);
    pair.inputs = random_hold_inputs(rng, opt.horizon, env.input_dim(), rbar, 10);
    return pair;
  };
  rep.contraction = audit_contraction(sys, make_pair, opt.pairs, opt.fit);

  auto make_probe = [&](int i) {
    RngStream rng(derive_stream(seed, {stream_id::kAudit, 2u, static_cast<std::uint64_t>(i)}));
    GainProbe probe_i;
    if (i % 2 == 0) {
      // Gain probe: identical start, different excitation.
      probe_i.x0a = sample_state(rng, false);
      probe_i.x0b = probe_i.x0a;
      probe_i.inputs_a = random_hold_inputs(rng, opt.horizon, env.input_dim(), rbar, 10);
      probe_i.inputs_b = random_hold_inputs(rng, opt.horizon, env.input_dim(), rbar, 10);
    } else {
      // Offset probe: identical excitation, different start.
      probe_i.x0a = sample_state(rng, false);
      probe_i.x0b = sample_state(rng, true);
      probe_i.inputs_a = random_hold_inputs(rng, opt.horizon, env.input_dim(), rbar, 10);
      probe_i.inputs_b = probe_i.inputs_a;
    }
    return probe_i;
  };
  rep.gain = audit_gain(sys, make_probe, opt.gain_probes);

  rep.pass = rep.contraction.pass && rep.gain.finite;
  return rep;
}

ExactnessReport audit_observer_exactness(const Env& env, const HighGainObserver& observer,
                                         int samples, std::uint64_t seed, double tol) {
  ExactnessReport rep;
  rep.samples = samples;
  RngStream rng(derive_stream(seed, {stream_id::kAudit, 3u}));
  const Index n = env.state_dim();
  const Index m = env.input_dim();
  Vec x(n), u(m), y(env.output_dim()), truth(n), est(n);
  const double span = std::max(1.0, env.u_eq().cwiseAbs().maxCoeff());
  for (int i = 0; i < samples; ++i) {
    x = env.sample_initial_state(rng);
    for (Index j = 0; j < m; ++j) u(j) = env.u_eq()(j) + span * rng.next_uniform(-1.0, 1.0);
    env.measure(x, y);
    env.step_nominal(x, u, truth);
    observer.predict(x, u, y, est);
    rep.max_error = std::max(rep.max_error, (truth - est).cwiseAbs().maxCoeff());
  }
  rep.pass = rep.max_error < tol;
  return rep;
}

ContractionReport audit_observer_contraction(const Env& env, const HighGainObserver& observer,
                                             const StateFeedback& feedback, std::uint64_t seed,
                                             int pairs, int horizon, const RateFitOptions& opt) {
  const AuditSystem sys = make_observer_audit(env, observer);
  const SystemContract plant = env.contract();
  const Index n = env.state_dim();
  const Index m = env.input_dim();
  const Index p = env.output_dim();

  auto make_pair = [&](int i) {
    RngStream rng(derive_stream(seed, {stream_id::kAudit, 4u, static_cast<std::uint64_t>(i)}));
    // Record realistic driving signals from one noisy closed-loop run.
    BaseControllerPolicy pol(env, observer, feedback);
    const Vec x0 = env.sample_initial_state(rng);
    NoiseSpec noise;
    noise.process_std = env.process_std();
    noise.measurement_std = env.measurement_std();
    noise.stream = derive_stream(seed, {stream_id::kAudit, 5u, static_cast<std::uint64_t>(i)});
    RolloutOptions ro = env.rollout_options();
    ro.horizon = horizon;
    const Trajectory traj = rollout(plant, pol, x0, noise, ro);

    AuditPair pair;
    pair.inputs.resize(horizon, Vec(m + p));
    for (int t = 0; t < horizon; ++t) {
      pair.inputs[t].head(m) = traj.inputs[t];
      pair.inputs[t].tail(p) = traj.outputs[t];
    }
    // Estimate starts spread over the task's initial-condition scale.
    const Vec half = 0.5 * (env.ic_hi() - env.ic_lo());
    pair.x0a.resize(n);
    pair.x0b.resize(n);
    for (Index j = 0; j < n; ++j) {
      pair.x0a(j) = env.estimate_init()(j) + 0.3 * half(j) * rng.next_gaussian();
      pair.x0b(j) = env.estimate_init()(j) + 0.3 * half(j) * rng.next_gaussian();
    }
    return pair;
  };
  return audit_contraction(sys, make_pair, pairs, opt);
}

AssumptionReport audit_assumptions(const Env& env, const HighGainObserver& observer,
                                   const StateFeedback& feedback, std::uint64_t seed,
                                   const ClosedLoopAuditOptions& opt) {
  AssumptionReport rep;
  rep.exactness = audit_observer_exactness(env, observer, 1000, seed);
  rep.observer_contraction =
      audit_observer_contraction(env, observer, feedback, seed, 8, opt.horizon, opt.fit);
  BaseControllerPolicy base(env, observer, feedback);
  rep.base_loop = audit_closed_loop(env, base, seed, opt);
  rep.pass = rep.exactness.pass && rep.observer_contraction.pass && rep.base_loop.pass;
  return rep;
}

// ----------------------------------------------------------------------------
// Scalar disturbance counterexample.
// ----------------------------------------------------------------------------

namespace {

// One step of the scalar loop: plant x+ = 0.5 sin x + u + d with full-state
// measurement, model-copy observer xh+ = 0.5 sin xh + u, and innovation
// feedback u = 10 (x - xh).
void counterexample_step(double d, double& x, double& xh) {
  const double u = 10.0 * (x - xh);
  const double xn = 0.5 * std::sin(x) + u + d;
  const double xhn = 0.5 * std::sin(xh) + u;
  x = xn;
  xh = xhn;
}

}  // namespace

CounterexampleReport scalar_disturbance_counterexample() {
  CounterexampleReport rep;

  // Without disturbance the loop is contracting: trajectories from different
  // plant/observer initial conditions coalesce.
  {
    double x1 = 0.5, xh1 = -0.5;
    double x2 = -2.0, xh2 = 1.0;
    for (int t = 0; t < 200; ++t) {
      counterexample_step(0.0, x1, xh1);
      counterexample_step(0.0, x2, xh2);
    }
    rep.nominal_gap_final = std::hypot(x1 - x2, xh1 - xh2);
    rep.nominal_contracts = rep.nominal_gap_final < 1e-6;
  }

  // A constant disturbance keeps the estimation error alive and the loop
  // settles onto distinct solutions while staying bounded.
  {
    double x1 = 0.0, xh1 = 0.0;
    double x2 = 10.0, xh2 = 10.0;
    const int T = 400;
    double gap_min = kInf, sup = 0.0;
    for (int t = 0; t < T; ++t) {
      counterexample_step(1.0, x1, xh1);
      counterexample_step(1.0, x2, xh2);
      sup = std::max({sup, std::abs(x1), std::abs(x2), std::abs(xh1), std::abs(xh2)});
      if (t >= T / 2) gap_min = std::min(gap_min, std::hypot(x1 - x2, xh1 - xh2));
    }
    rep.disturbed_gap_min = gap_min;
    rep.disturbed_sup = sup;
    rep.disturbed_separates = gap_min > 0.1;
    rep.disturbed_bounded = std::isfinite(sup) && sup < 100.0;
  }

  rep.pass = rep.nominal_contracts && rep.disturbed_separates && rep.disturbed_bounded;
  return rep;
}

// ----------------------------------------------------------------------------
// Shipped fixture audits.
// ----------------------------------------------------------------------------

FixtureAuditReport run_fixture_audits() {
  FixtureAuditReport rep;

  auto scalar_system = [](double a) {
    return make_map_audit(
        1, 1, 1,
        [a](const Vec& x, const Vec& u, Vec& xn) { xn(0) = a * x(0) + u(0); },
        [](const Vec& x, const Vec&, Vec& y) { y = x; });
  };

  // Known-rate decay fixture.
  {
    const AuditSystem sys = scalar_system(0.5);
    AuditTrace ta, tb;
    std::vector<Vec> zeros(60, Vec::Zero(1));
    sys.simulate(Vec::Constant(1, 1.0), zeros, ta);
    sys.simulate(Vec::Constant(1, -1.0), zeros, tb);
    rep.scalar_fit = fit_decay_rate(state_distances(ta, tb));
  }
  const bool scalar_ok =
      std::abs(rep.scalar_fit.rate - 0.5) <= 0.01 && rep.scalar_fit.r2 >= 0.99;

  // Bounded-state fixtures: a stable loop passes, an unstable one is flagged.
  {
    RngStream rng(derive_stream(7u, {stream_id::kAudit, 6u}));
    std::vector<Vec> inputs = random_hold_inputs(rng, 500, 1, 1.0, 10);
    rep.stable_bounded =
        audit_boundedness(scalar_system(0.9), Vec::Constant(1, 5.0), inputs);
    rep.unstable_control =
        audit_boundedness(scalar_system(1.1), Vec::Constant(1, 1.0), inputs);
  }

  // Decaying input-gap fixture: trajectories under inputs whose difference
  // shrinks like 0.9^t converge no slower than that envelope.
  {
    GainProbe probe;
    probe.x0a = Vec::Zero(1);
    probe.x0b = Vec::Zero(1);
    const int T = 300;
    probe.inputs_a.assign(T, Vec::Zero(1));
    probe.inputs_b.assign(T, Vec::Zero(1));
    double level = 1.0;
    for (int t = 0; t < T; ++t) {
      probe.inputs_b[t](0) = level;
      level *= 0.9;
    }
    rep.input_decay = audit_convergence(scalar_system(0.8), probe, 0.9, 0.8);
  }

  rep.counterexample = scalar_disturbance_counterexample();

  rep.pass = scalar_ok && rep.stable_bounded.pass && !rep.unstable_control.pass &&
             rep.input_decay.pass && rep.counterexample.pass;
  return rep;
}

}  // namespace ywb
