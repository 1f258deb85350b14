#pragma once

#include <memory>

#include "ywb/common.hpp"
#include "ywb/environment.hpp"

namespace ywb {

// State-feedback law ū = k(x̂).  Instances may carry a discrete internal mode
// (e.g. swing-up vs. balance with hysteresis); construction is pure, one
// instance per rollout.  A sampled-pair Lipschitz estimate is recorded at
// construction (per mode, over the tuning region).
class StateFeedback {
 public:
  virtual ~StateFeedback() = default;

  virtual void reset() {}  // restore the default mode
  virtual void control(const Vec& xhat, Vec& u) = 0;
  virtual std::unique_ptr<StateFeedback> clone() const = 0;

  // Discrete mode as a number so audits can align/restore it; laws without
  // modes report 0.
  virtual double mode() const { return 0.0; }
  virtual void set_mode(double) {}

  double lipschitz_certificate() const { return lipschitz_cert_; }

 protected:
  double lipschitz_cert_ = 0.0;
};

// ----------------------------------------------------------------------------
// Magnetic suspension: cascaded position/force/current law.
//
// Position loop commands an acceleration, force balance converts it to a
// desired magnet force (clamped positive — the magnet only attracts), the
// inverse force law gives the current set point, and the voltage cancels the
// coil's motional EMF while driving the current error down at rate kc.
// ----------------------------------------------------------------------------
struct MaglevFeedbackGains {
  double kp = 120.0;      // position stiffness [1/s^2]
  double kd = 22.0;       // position damping [1/s]
  double kc = 60.0;       // current-loop rate [1/s]
  double force_min_rel = 0.05;  // force clamp, relative to weight
  double force_max_rel = 8.0;
};

std::unique_ptr<StateFeedback> make_maglev_feedback(const MaglevEnv& env,
                                                    const MaglevFeedbackGains& gains = {});

// ----------------------------------------------------------------------------
// Furuta pendulum: energy-pumping swing-up blended with an LQR balancer.
//
// Away from upright, the arm acceleration is commanded to regulate the
// pendulum energy toward its upright-rest value (direction sign(α̇ cos α)),
// with a mild arm-centering term; within the capture cone an LQR designed on
// the discrete linearization takes over.  A hysteresis band separates the
// capture and release angles so the mode cannot chatter.
// ----------------------------------------------------------------------------
struct PendulumFeedbackGains {
  // The swing energy deficit from hanging rest is ~0.03 J; the gain is sized
  // so the commanded acceleration saturates until the error is small, and the
  // reference sits above the upright-rest level to pre-pay the damping loss
  // of the final rise.
  double energy_gain = 2.0e4;    // [rad/s^2 per J]
  double energy_ref = 0.005;     // [J] relative to upright rest
  double accel_max = 150.0;      // commanded arm acceleration clamp [rad/s^2]
  double arm_kp = 1.2;           // arm centering during swing-up
  double arm_kd = 5.0;           // caps arm wind-up so the pendulum can rise
  double capture_deg = 30.0;     // switch to balance inside this cone
  double release_deg = 35.0;     // back to swing-up outside this cone
  double v_max = 12.0;           // voltage clamp [V]
  Vec lqr_q;                     // diagonal of the LQR state weight (size 4)
  double lqr_r = 1.0;

  PendulumFeedbackGains();
};

std::unique_ptr<StateFeedback> make_pendulum_swingup_lqr(const PendulumEnv& env,
                                                         const PendulumFeedbackGains& gains = {});

// DARE residual of the LQR design embedded in a pendulum feedback law,
// exposed for verification.
struct PendulumLqrDesign {
  Mat A, B;   // discrete linearization at upright
  Mat P;      // Riccati solution
  Mat K;      // state-feedback gain
  double residual = 0.0;
};
PendulumLqrDesign design_pendulum_lqr(const PendulumEnv& env, const PendulumFeedbackGains& gains = {});

}  // namespace ywb
