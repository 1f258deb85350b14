#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ywb/common.hpp"
#include "ywb/rng.hpp"

namespace ywb {

// ============================================================================
// Discrete-time system contract and rollout machinery.
// ============================================================================

// A discrete-time system
//   x_{t+1} = step(x_t, u_t, w_t, t)
//   y_t     = measure(x_t, v_t, t)
// where w/v are exogenous noise vectors supplied by the caller.  Maps must be
// pure (no hidden state); time enters explicitly so wrappers can inject
// time-varying disturbances.
struct SystemContract {
  Index state_dim = 0;
  Index input_dim = 0;
  Index output_dim = 0;
  std::function<void(const Vec& x, const Vec& u, const Vec& w, int t, Vec& out)> step;
  std::function<void(const Vec& x, const Vec& v, int t, Vec& out)> measure;
};

// Continuous-time right-hand side dx/dt = rhs(x, u).
using ContinuousRhs = std::function<void(const Vec& x, const Vec& u, Vec& dx)>;

// Classic fourth-order Runge-Kutta step of `rhs` over one interval dt.
void rk4_step(const ContinuousRhs& rhs, double dt, const Vec& x, const Vec& u, Vec& out);

// Discretizes dx/dt = rhs(x, u) with RK4 at fixed dt.  The result has
// additive process noise on the state update and full-state measurement with
// additive noise: step = rk4(x, u) + w, measure = x + v.
SystemContract discretize(const ContinuousRhs& rhs, double dt, Index state_dim, Index input_dim);

// ----------------------------------------------------------------------------
// Policies: causal output-feedback controllers with internal state.
// ----------------------------------------------------------------------------

class Policy {
 public:
  virtual ~Policy() = default;

  // Clears internal state for a fresh rollout.
  virtual void reset() = 0;

  // Consumes the measurement y_t and exogenous reference/excitation r_t,
  // produces the control u_t.  Called once per step in order.
  virtual void step(const Vec& y, const Vec& r, Vec& u_out) = 0;

  // Deep copy including current internal state.
  virtual std::unique_ptr<Policy> clone() const = 0;

  virtual Index output_dim() const = 0;

  // Continuous internal state as one flat vector (estimates, model states),
  // so audits can restart policies from chosen internal conditions.
  // Stateless policies report dimension 0.
  virtual Index internal_dim() const { return 0; }
  virtual void get_internal(Vec& s) const { s.resize(0); }
  virtual void set_internal(const Vec& s) {
    require(s.size() == 0, "policy: no internal state to set");
  }

  // Internal state mapped into the space where trajectory distances are
  // measured; policies holding angular estimates override this with a
  // wrap-invariant embedding.  Default: the raw internal state.
  virtual Index embedded_internal_dim() const { return internal_dim(); }
  virtual void embed_internal(Vec& e) const { get_internal(e); }

  // Per-dimension magnitude of a meaningful internal-state perturbation,
  // used by audits so probes stay within the loop's operating envelope;
  // state estimates scale with the task's initial-condition spread.
  virtual void internal_perturbation_scale(Vec& s) const {
    s = Vec::Ones(internal_dim());
  }
};

// ----------------------------------------------------------------------------
// Rollout configuration and results.
// ----------------------------------------------------------------------------

struct NoiseSpec {
  Vec process_std;      // per-state standard deviations (>= 0)
  Vec measurement_std;  // per-output standard deviations (>= 0)
  std::uint64_t stream = 0;  // fully-derived stream key for this rollout

  static NoiseSpec zero(Index state_dim, Index output_dim);
};

struct RolloutOptions {
  int horizon = 100;
  // Stage cost evaluated at (x_t, u_t); empty means cost is recorded as 0.
  std::function<double(const Vec& x, const Vec& u)> step_cost;
  // Exogenous plant-input excitation r_t (added to the policy output at the
  // plant and passed to the policy); empty means r = 0.
  std::function<void(int t, Vec& r)> reference;
  // Optional state box; leaving the box marks the rollout as diverged.
  Vec box_lo, box_hi;  // empty = only finiteness is checked
  // Stage cost charged for every step at and after a divergence.
  double divergence_penalty = 1e4;
};

struct Trajectory {
  std::vector<Vec> states;   // length horizon + 1
  std::vector<Vec> inputs;   // length horizon (policy outputs, excl. r)
  std::vector<Vec> outputs;  // length horizon (measurements seen by policy)
  std::vector<double> step_costs;  // length horizon
  bool diverged = false;
  int diverged_at = -1;  // first step whose cost was replaced by the penalty

  double total_cost() const;
};

// Simulates `policy` against `system` from x0 for options.horizon steps.
// Noise draws come from a fresh stream keyed by noise.stream with a fixed
// per-step order (measurement vector first, then process vector), so the
// realization depends only on the key.  Non-finite policy output or a state
// leaving the box/finite range stops the simulation and charges the
// divergence penalty for all remaining steps.
Trajectory rollout(const SystemContract& system, Policy& policy, const Vec& x0,
                   const NoiseSpec& noise, const RolloutOptions& options);

// Runs one rollout per (initial state, noise key) pair with a per-rollout
// clone of `prototype`.  Results are written to per-index slots, so the
// output is identical for any worker count.
std::vector<Trajectory> batch_rollout(const SystemContract& system, const Policy& prototype,
                                      const std::vector<Vec>& initial_states,
                                      const std::vector<std::uint64_t>& noise_keys,
                                      const Vec& process_std, const Vec& measurement_std,
                                      const RolloutOptions& options);

// Mean of total costs, accumulated in index order.
double mean_total_cost(const std::vector<Trajectory>& trajectories);

// Writes `t, x_0.., u_0.., y_0.., cost` with one row per step (0..horizon-1).
// Values are printed with enough digits to round-trip exactly.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

}  // namespace ywb
