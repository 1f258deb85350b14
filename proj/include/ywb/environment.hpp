#pragma once

#include <limits>
#include <string>
#include <vector>

#include "ywb/common.hpp"
#include "ywb/rng.hpp"
#include "ywb/system.hpp"

namespace ywb {

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

// ============================================================================
// Quadratic tracking cost  J = sum_t |p(x_t) - z_ref|^2_Q + |u_t - u_ref|^2_R.
// ============================================================================
struct CostSpec {
  Mat Q;      // weight on the performance output (positive semidefinite)
  Mat R;      // weight on the input deviation (positive definite)
  Vec z_ref;
  Vec u_ref;
  std::function<void(const Vec& x, Vec& z)> perf_map;  // z = p(x)
  int horizon = 100;

  // Eigenvalue checks: Q >= 0, R > 0; throws ConfigError on violation.
  void validate() const;

  // Input deviation incurring unit effort cost under the heaviest weight:
  // the natural magnitude scale of control corrections for this objective.
  double control_unit() const;

  double step_cost(const Vec& x, const Vec& u) const;

  // Recomputes the trajectory cost from states/inputs; throws ConfigError if
  // the trajectory horizon does not match this spec.
  double trajectory_cost(const Trajectory& traj) const;
};

// Which observer correction chain feeds which states: one measured output
// drives an integrator chain of states, ordered from the measured state down
// the chain of its derivatives.
struct ObserverStructure {
  struct Chain {
    int output_index = 0;
    std::vector<int> state_indices;  // measured state first
  };
  std::vector<Chain> chains;
};

// ============================================================================
// Environment base: continuous dynamics + measurement + cost + noise levels +
// sampling boxes.  Instances are immutable after construction and must
// outlive any SystemContract obtained from them.
// ============================================================================
class Env {
 public:
  virtual ~Env() = default;

  const std::string& name() const { return name_; }
  double dt() const { return dt_; }
  int horizon() const { return cost_.horizon; }
  Index state_dim() const { return state_dim_; }
  Index input_dim() const { return input_dim_; }
  Index output_dim() const { return output_dim_; }

  // Continuous dynamics dx/dt = rhs(x, u_total) with u_total = u + r.
  virtual void rhs(const Vec& x, const Vec& u, Vec& dx) const = 0;

  // Noiseless measurement y = c(x).
  virtual void measure(const Vec& x, Vec& y) const = 0;

  // Innovation convention y - c(x̂); angular channels are wrapped so that a
  // full-turn offset is not treated as an error.
  virtual void output_error(const Vec& y, const Vec& yhat, Vec& err) const;

  // One noiseless RK4 step of the discretized dynamics.
  void step_nominal(const Vec& x, const Vec& u, Vec& out) const;

  // Discrete-time noisy system contract (additive process noise after the
  // RK4 step, measurement noise on c(x)).  Captures `this`.
  SystemContract contract() const;

  // Distance embedding used by trajectory audits; identity by default,
  // trigonometric for angular states.
  virtual Index embed_dim() const { return state_dim_; }
  virtual void embed(const Vec& x, Vec& e) const { e = x; }

  const CostSpec& cost() const { return cost_; }
  double step_cost(const Vec& x, const Vec& u) const { return cost_.step_cost(x, u); }

  const Vec& process_std() const { return process_std_; }
  const Vec& measurement_std() const { return measurement_std_; }
  const Vec& x_eq() const { return x_eq_; }        // task set point
  const Vec& u_eq() const { return u_eq_; }        // equilibrium input
  const Vec& estimate_init() const { return estimate_init_; }  // default x̂0

  // Half-width of each measured channel's range over the initial-condition
  // box: the natural per-channel scale of output deviations (channels the
  // box does not move fall back to 1).
  Vec measured_halfwidth() const;

  // Maps the first measurement into an observer start-up estimate.  The
  // default ignores the measurement and starts from estimate_init(), which
  // keeps the initial deviation visible in the innovations sequence; tasks
  // whose estimate transient would destabilize the loop override this to copy
  // measured components from y.
  virtual void seed_estimate(const Vec& y, Vec& xhat) const {
    (void)y;
    xhat = estimate_init_;
  }
  const Vec& ic_lo() const { return ic_lo_; }
  const Vec& ic_hi() const { return ic_hi_; }
  const Vec& box_lo() const { return box_lo_; }    // divergence box
  const Vec& box_hi() const { return box_hi_; }
  double input_excitation_bound() const { return r_bound_; }

  const ObserverStructure& observer_structure() const { return obs_structure_; }

  // Task-level tracking deviation over the trailing fraction of a trajectory,
  // used to decide when an adversarial perturbation has broken the task.
  virtual double tracking_deviation(const Trajectory& traj, double tail_fraction) const;

  // Deviation level above which the task counts as broken.
  virtual double attack_threshold() const { return std::numeric_limits<double>::infinity(); }

  // Uniform sample from the initial-condition box.
  Vec sample_initial_state(RngStream& rng) const;

  // Horizon, stage cost, divergence box and penalty prewired for this task.
  RolloutOptions rollout_options() const;

 protected:
  std::string name_;
  double dt_ = 0.01;
  Index state_dim_ = 0, input_dim_ = 0, output_dim_ = 0;
  CostSpec cost_;
  Vec process_std_, measurement_std_;
  Vec x_eq_, u_eq_, estimate_init_;
  Vec ic_lo_, ic_hi_, box_lo_, box_hi_;
  double r_bound_ = 1.0;
  double divergence_penalty_ = 1e4;
  ObserverStructure obs_structure_;

  // Validates dimensions and boxes; called at the end of construction.
  void finalize();
};

// ============================================================================
// Magnetic suspension: a steel ball held under an electromagnet.
// States: ball position below the magnet [m], velocity [m/s], coil current
// [A].  Input: coil voltage [V].  Measured: position and current.
// The coil inductance depends on ball position, L(y) = L1 + L0*a/(a + y),
// giving the attracting force F = L0*a*i^2 / (2 (a + y)^2).
// ============================================================================
struct MaglevParams {
  double m = 0.1;      // ball mass [kg]
  double k = 0.001;    // viscous friction [N s/m]
  double g = 9.81;     // gravity [m/s^2]
  double a = 0.05;     // inductance length scale [m]
  double L0 = 0.01;    // position-dependent inductance magnitude [H]
  double L1 = 0.02;    // nominal inductance [H]
  double R = 1.0;      // coil resistance [Ohm]
  double dt = 0.01;    // sample time [s]
  int horizon = 100;
  double target = 0.05;             // position set point [m]
  double process_noise = 5e-4;
  double measurement_noise = 1e-3;
};

class MaglevEnv : public Env {
 public:
  explicit MaglevEnv(const MaglevParams& p = {});

  void rhs(const Vec& x, const Vec& u, Vec& dx) const override;
  void measure(const Vec& x, Vec& y) const override;

  // Absolute offset of the mean ball position from the set point [m].
  double tracking_deviation(const Trajectory& traj, double tail_fraction) const override;
  double attack_threshold() const override { return 0.01; }

  const MaglevParams& params() const { return p_; }
  // Coil current holding the ball stationary at position y.
  double equilibrium_current(double y) const;
  double inductance(double y) const;

 private:
  MaglevParams p_;
};

// ============================================================================
// Rotary-arm (Furuta) pendulum.
// States: arm angle theta [rad], pendulum angle alpha from upright [rad],
// and their rates.  Input: motor voltage [V].  Measured: the two angles.
// Full Lagrangian rigid-body model with a DC-motor torque on the arm.
// ============================================================================
struct PendulumParams {
  double Rm = 8.4;      // motor winding resistance [Ohm]
  double kt = 0.042;    // torque constant [N m/A]
  double km = 0.042;    // back-EMF constant [V s/rad]
  double mr = 0.095;    // arm mass [kg]
  double Lr = 0.085;    // arm length [m]
  double Jm = 4e-6;     // motor shaft inertia [kg m^2]
  double mp = 0.024;    // pendulum mass [kg]
  double Lp = 0.129;    // pendulum length [m]
  double Dr = 0.0015;   // arm viscous damping [N m s]
  double Dp = 5.0e-5;   // pendulum viscous damping [N m s]
  double g = 9.81;
  double dt = 0.02;     // sample time [s]
  int horizon = 100;
  double process_noise = 1e-2;
  double measurement_noise = 1e-2;
};

class PendulumEnv : public Env {
 public:
  explicit PendulumEnv(const PendulumParams& p = {});

  void rhs(const Vec& x, const Vec& u, Vec& dx) const override;
  void measure(const Vec& x, Vec& y) const override;
  void output_error(const Vec& y, const Vec& yhat, Vec& err) const override;
  void seed_estimate(const Vec& y, Vec& xhat) const override;

  // Angles enter audit distances through (cos, sin) pairs so that full-turn
  // winding differences do not register as state differences.
  Index embed_dim() const override { return 6; }
  void embed(const Vec& x, Vec& e) const override;

  // Mean absolute pendulum angle from upright [rad].
  double tracking_deviation(const Trajectory& traj, double tail_fraction) const override;
  double attack_threshold() const override;

  const PendulumParams& params() const { return p_; }

  // Derived inertias.
  double arm_inertia() const { return J0_; }       // about the vertical axis
  double pend_inertia() const { return J2_; }      // about the pivot
  double coupling() const { return mLrlp_; }       // m_p * L_r * l_p

  // Mechanical energy of the full device (kinetic + pendulum potential,
  // zero at pendulum pivot height); conserved when damping and input vanish.
  double total_energy(const Vec& x) const;
  // Pendulum-only energy relative to the upright rest value, the quantity
  // regulated by the swing-up law.
  double pendulum_energy(const Vec& x) const;

 private:
  PendulumParams p_;
  double J0_ = 0.0, J2_ = 0.0, mLrlp_ = 0.0, lp_ = 0.0;
};

// ============================================================================
// Additive disturbances d_x (on the state update) and d_y (on the output),
// applied per time index; indices beyond the sequence ends use zero.  Zero
// sequences return a behaviorally identical system.
// ============================================================================
SystemContract apply_disturbance(const SystemContract& plant,
                                 const std::vector<Vec>& d_x,
                                 const std::vector<Vec>& d_y);

}  // namespace ywb
