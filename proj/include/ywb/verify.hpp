#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ywb/common.hpp"
#include "ywb/environment.hpp"
#include "ywb/feedback.hpp"
#include "ywb/observer.hpp"
#include "ywb/sequence_model.hpp"
#include "ywb/system.hpp"

namespace ywb {

// ----------------------------------------------------------------------------
// Audit harness: a uniform "simulate from a chosen initial state under a
// chosen input sequence" view of any system we want to certify numerically.
// Trace states may live in an embedded (wrap-invariant) space whose dimension
// differs from the settable initial state.
// ----------------------------------------------------------------------------

struct AuditTrace {
  std::vector<Vec> states;   // length horizon+1
  std::vector<Vec> outputs;  // length horizon
};

struct AuditSystem {
  Index state_dim = 0;   // dimension of the settable initial state
  Index input_dim = 0;   // per-step input dimension
  Index output_dim = 0;  // per-step output dimension
  std::function<void(const Vec& x0, const std::vector<Vec>& inputs, AuditTrace&)> simulate;
};

// Generic discrete map x+ = step(x, u), y = out(x, u).
AuditSystem make_map_audit(Index state_dim, Index input_dim, Index output_dim,
                           std::function<void(const Vec&, const Vec&, Vec&)> step,
                           std::function<void(const Vec&, const Vec&, Vec&)> out);

// A sequence model driven by its inputs; outputs are the model outputs.
AuditSystem make_sequence_model_audit(const SequenceModel& prototype);

// Observer driven by recorded (plant input, measurement) pairs; trace states
// are the estimates mapped through the environment embedding.
AuditSystem make_observer_audit(const Env& env, const HighGainObserver& observer);

// Closed loop of plant + policy driven by the excitation input r, with a fixed
// measurement/process noise realization shared by every simulate() call so
// paired rollouts see identical noise.  Initial state layout:
// [plant state (n); policy internal state].  Trace states are
// [embed(x); policy.embed_internal()]; outputs are the performance variable
// embed(x).
AuditSystem make_closed_loop_audit(const Env& env, const Policy& prototype,
                                   std::uint64_t noise_key, bool with_noise = true);

// ----------------------------------------------------------------------------
// Exponential-rate fitting on pairwise trajectory distances.
// ----------------------------------------------------------------------------

struct RateFitOptions {
  double floor = 1e-12;         // absolute numerical floor on distances
  double window_lo = 1e-10;     // fit window lower edge
  double window_hi_frac = 0.1;  // fit window upper edge, relative to d0
  double min_r2 = 0.9;          // goodness-of-fit gate
  double dispersion_bound = 1.5;  // max/min fitted rate across pairs
  int min_points = 3;           // minimum window size for a regression
};

struct PairFit {
  double rate = 1.0;       // fitted per-step contraction factor
  double overshoot = 1.0;  // max_t d_t / (d0 * rate^t) up to the window end
  double r2 = 0.0;
  int points = 0;
  double d0 = 0.0;
  double d_min = 0.0;
  bool degenerate = false;  // started at the numerical floor; nothing to fit
  bool fast = false;        // crossed the floor before a window formed
  bool decayed = false;     // reached the fit window at all
};

// Least-squares fit of log d_t over the window where d is between window_lo
// and d0 * window_hi_frac.  Distances index time 0..T.
PairFit fit_decay_rate(const std::vector<double>& distances, const RateFitOptions& opt = {});

struct ContractionReport {
  std::vector<PairFit> fits;
  double rate = 0.0;        // worst (largest) fitted rate
  double overshoot = 0.0;   // worst overshoot
  double min_r2 = 1.0;      // worst goodness of fit among regressions
  double dispersion = 1.0;  // max/min fitted rate among regressions
  int fitted = 0;
  int fast = 0;
  int degenerate = 0;
  bool all_degenerate = false;
  bool pass = false;
  std::string failure;
};

// One audit pair: two initial states rolled out under the same input sequence.
struct AuditPair {
  Vec x0a, x0b;
  std::vector<Vec> inputs;
};

ContractionReport audit_contraction(const AuditSystem& sys,
                                    const std::function<AuditPair(int)>& make_pair, int pairs,
                                    const RateFitOptions& opt = {});

// ----------------------------------------------------------------------------
// Incremental-gain probing of the input -> output map.
// ----------------------------------------------------------------------------

// One gain probe: two rollouts differing in inputs (gain) or in initial
// state only (offset).
struct GainProbe {
  Vec x0a, x0b;
  std::vector<Vec> inputs_a, inputs_b;
};

struct GainReport {
  double gain = 0.0;    // max ||delta out||_2 / ||delta in||_2 over gain probes
  double offset = 0.0;  // max ||delta out||_2 over equal-input probes
  int gain_probes = 0;
  int offset_probes = 0;
  bool finite = false;
};

GainReport audit_gain(const AuditSystem& sys, const std::function<GainProbe(int)>& make_probe,
                      int probes);

// ----------------------------------------------------------------------------
// Boundedness under bounded inputs (long-horizon envelope audit).
// ----------------------------------------------------------------------------

struct BoundednessReport {
  double sup_norm = 0.0;
  double trend = 0.0;  // relative growth of mean state norm, 3rd vs 4th quarter
  bool finite = false;
  bool pass = false;
  Vec final_state;
};

BoundednessReport audit_boundedness(const AuditSystem& sys, const Vec& x0,
                                    const std::vector<Vec>& inputs, double trend_tol = 0.05);

// ----------------------------------------------------------------------------
// Convergence under exponentially converging inputs: two rollouts whose input
// sequences satisfy |u_a - u_b| <= b * input_rate^t must have state and output
// trajectories converging no slower than max(system rate, input rate) plus a
// small fitting margin.
// ----------------------------------------------------------------------------

struct ConvergenceReport {
  PairFit state_fit;
  PairFit output_fit;
  double rate_bound = 0.0;  // max(declared_rate, input_rate) + margin
  bool pass = false;
};

ConvergenceReport audit_convergence(const AuditSystem& sys, const GainProbe& probe,
                                    double input_rate, double declared_rate,
                                    double margin = 0.05, const RateFitOptions& opt = {});

// ----------------------------------------------------------------------------
// Environment-level audits.
// ----------------------------------------------------------------------------

// Closed-loop contraction + excitation-to-performance gain audit for a policy.
struct ClosedLoopAuditReport {
  ContractionReport contraction;
  GainReport gain;
  bool pass = false;
};

struct ClosedLoopAuditOptions {
  int pairs = 12;
  int gain_probes = 12;
  int horizon = 300;
  bool with_noise = true;
  double internal_perturbation = 0.2;  // std of initial internal-state offsets
  RateFitOptions fit;
};

ClosedLoopAuditReport audit_closed_loop(const Env& env, const Policy& prototype,
                                        std::uint64_t seed,
                                        const ClosedLoopAuditOptions& opt = {});

// Observer replicates the plant exactly when fed the plant's own output.
struct ExactnessReport {
  double max_error = 0.0;
  int samples = 0;
  bool pass = false;
};

ExactnessReport audit_observer_exactness(const Env& env, const HighGainObserver& observer,
                                         int samples, std::uint64_t seed, double tol = 1e-12);

// Observer contraction as a system driven by recorded (plant input, measurement)
// sequences from noisy closed-loop runs.
ContractionReport audit_observer_contraction(const Env& env, const HighGainObserver& observer,
                                             const StateFeedback& feedback, std::uint64_t seed,
                                             int pairs = 8, int horizon = 300,
                                             const RateFitOptions& opt = {});

// Base-controller assumption bundle: exactness, observer contraction, and
// base-loop contraction + gain.  Gates training.
struct AssumptionReport {
  ExactnessReport exactness;
  ContractionReport observer_contraction;
  ClosedLoopAuditReport base_loop;
  bool pass = false;
};

AssumptionReport audit_assumptions(const Env& env, const HighGainObserver& observer,
                                   const StateFeedback& feedback, std::uint64_t seed,
                                   const ClosedLoopAuditOptions& opt = {});

// ----------------------------------------------------------------------------
// Scalar disturbance counterexample: an observer-based loop that is
// contracting without disturbance loses incremental stability under a
// constant disturbance (solutions settle to distinct attractors) while
// remaining bounded.
// ----------------------------------------------------------------------------

struct CounterexampleReport {
  double nominal_gap_final = 0.0;  // trajectory gap at the end, no disturbance
  double disturbed_gap_min = 0.0;  // min gap over the tail, constant disturbance
  double disturbed_sup = 0.0;      // sup |state| under the disturbance
  bool nominal_contracts = false;
  bool disturbed_separates = false;
  bool disturbed_bounded = false;
  bool pass = false;
};

CounterexampleReport scalar_disturbance_counterexample();

// ----------------------------------------------------------------------------
// Self-contained fixture audits shipped with the tool: known-rate positive
// fixtures must pass and an unstable negative control must be flagged.
// ----------------------------------------------------------------------------

struct FixtureAuditReport {
  PairFit scalar_fit;                  // x+ = 0.5 x, expect rate 0.5
  BoundednessReport stable_bounded;    // x+ = 0.9 x + u with bounded u
  BoundednessReport unstable_control;  // x+ = 1.1 x + u must be flagged
  ConvergenceReport input_decay;       // scalar loop under decaying input gap
  CounterexampleReport counterexample;
  bool pass = false;
};

FixtureAuditReport run_fixture_audits();

}  // namespace ywb
