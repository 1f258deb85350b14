#include "ywb/feedback.hpp"

#include <cmath>

#include "ywb/linalg.hpp"
#include "ywb/rng.hpp"

namespace ywb {

namespace {

// Sampled-pair Lipschitz estimate of a law over a box; pairs whose modes
// diverge are skipped so the certificate is per-mode.
double sample_lipschitz(StateFeedback& law, const Vec& lo, const Vec& hi, int pairs,
                        std::uint64_t key) {
  RngStream rng(key);
  const Index n = lo.size();
  Vec x1(n), x2(n), u1(1), u2(1);
  double bound = 0.0;
  for (int k = 0; k < pairs; ++k) {
    for (Index i = 0; i < n; ++i) {
      x1[i] = rng.next_uniform(lo[i], hi[i]);
      x2[i] = rng.next_uniform(lo[i], hi[i]);
    }
    law.reset();
    law.control(x1, u1);
    const double mode1 = law.mode();
    law.reset();
    law.control(x2, u2);
    if (law.mode() != mode1) continue;
    const double dx = (x1 - x2).norm();
    if (dx < 1e-12) continue;
    bound = std::max(bound, (u1 - u2).norm() / dx);
  }
  law.reset();
  return bound;
}

// ----------------------------------------------------------------------------
// Maglev cascade
// ----------------------------------------------------------------------------

class MaglevFeedback final : public StateFeedback {
 public:
  MaglevFeedback(const MaglevEnv& env, const MaglevFeedbackGains& g) : env_(&env), g_(g) {
    const auto& p = env.params();
    f_min_ = g.force_min_rel * p.m * p.g;
    f_max_ = g.force_max_rel * p.m * p.g;
    Vec lo = env.ic_lo(), hi = env.ic_hi();
    lipschitz_cert_ = sample_lipschitz(*this, lo, hi, 2000, derive_stream(0, {9101}));
  }

  void control(const Vec& xhat, Vec& u) override {
    const auto& p = env_->params();
    const double pos = xhat[0], vel = xhat[1], cur = xhat[2];
    // Position loop: command an acceleration toward the set point.
    const double acc_des = -g_.kp * (pos - p.target) - g_.kd * vel;
    // Force balance m*acc = m*g - k*vel - F  =>  desired magnet force.
    double f_des = p.m * (p.g - acc_des) - p.k * vel;
    f_des = std::min(std::max(f_des, f_min_), f_max_);
    // Invert F = L0 a i^2 / (2 (a+y)^2) for the current set point.
    const double i_des = (p.a + pos) * std::sqrt(2.0 * f_des / (p.L0 * p.a));
    // Current loop: cancel the motional EMF, then exponential current error
    // decay at rate kc.  d/dt(L i) = v - R i - dL/dy * vel * i.
    const double ay = p.a + pos;
    const double dL_dy = -p.L0 * p.a / (ay * ay);
    u[0] = p.R * cur + dL_dy * vel * cur - env_->inductance(pos) * g_.kc * (cur - i_des);
  }

  std::unique_ptr<StateFeedback> clone() const override {
    return std::make_unique<MaglevFeedback>(*this);
  }

 private:
  const MaglevEnv* env_;
  MaglevFeedbackGains g_;
  double f_min_ = 0.0, f_max_ = 0.0;
};

// ----------------------------------------------------------------------------
// Pendulum swing-up + LQR
// ----------------------------------------------------------------------------

class PendulumFeedback final : public StateFeedback {
 public:
  PendulumFeedback(const PendulumEnv& env, const PendulumFeedbackGains& g)
      : env_(&env), g_(g), design_(design_pendulum_lqr(env, g)) {
    capture_ = g.capture_deg * M_PI / 180.0;
    release_ = g.release_deg * M_PI / 180.0;
    // Per-mode Lipschitz estimates: balance cone and swing region.
    Vec lo(4), hi(4);
    lo << -M_PI / 2, -capture_, -2.0, -4.0;
    hi << M_PI / 2, capture_, 2.0, 4.0;
    const double balance = sample_lipschitz(*this, lo, hi, 2000, derive_stream(0, {9102}));
    lo[1] = -M_PI;
    hi[1] = M_PI;
    const double swing = sample_lipschitz(*this, lo, hi, 2000, derive_stream(0, {9103}));
    lipschitz_cert_ = std::max(balance, swing);
  }

  void reset() override { balancing_ = false; }
  double mode() const override { return balancing_ ? 1.0 : 0.0; }
  void set_mode(double m) override { balancing_ = m != 0.0; }

  void control(const Vec& xhat, Vec& u) override {
    const double alpha_w = wrap_angle(xhat[1]);
    if (balancing_) {
      if (std::abs(alpha_w) > release_) balancing_ = false;
    } else if (std::abs(alpha_w) <= capture_) {
      balancing_ = true;
    }

    const auto& p = env_->params();
    const double th_dot = xhat[2];
    double v;
    if (balancing_) {
      thread_local Vec xw;
      xw.resize(4);
      xw << wrap_angle(xhat[0]), alpha_w, th_dot, xhat[3];
      v = -(design_.K * xw)(0);
    } else {
      // Regulate the pendulum energy toward its upright-rest value: commanded
      // arm acceleration opposes sign(α̇ cos α) scaled by the energy error,
      // plus a mild arm-centering term.
      const double energy = env_->pendulum_energy(xhat);
      const double pump = std::cos(xhat[1]) * xhat[3];
      const double dir = pump >= 0.0 ? 1.0 : -1.0;
      double acc = -g_.energy_gain * (g_.energy_ref - energy) * dir;
      acc += -g_.arm_kp * wrap_angle(xhat[0]) - g_.arm_kd * th_dot;
      acc = std::min(std::max(acc, -g_.accel_max), g_.accel_max);
      // Voltage realizing that arm acceleration through the DC motor.
      const double torque = env_->arm_inertia() * acc + p.Dr * th_dot;
      v = p.Rm / p.kt * torque + p.km * th_dot;
    }
    u[0] = std::min(std::max(v, -g_.v_max), g_.v_max);
  }

  std::unique_ptr<StateFeedback> clone() const override {
    return std::make_unique<PendulumFeedback>(*this);
  }

 private:
  const PendulumEnv* env_;
  PendulumFeedbackGains g_;
  PendulumLqrDesign design_;
  double capture_ = 0.0, release_ = 0.0;
  bool balancing_ = false;
};

}  // namespace

PendulumFeedbackGains::PendulumFeedbackGains() {
  lqr_q = Vec(4);
  lqr_q << 5.0, 60.0, 0.5, 1.5;
}

std::unique_ptr<StateFeedback> make_maglev_feedback(const MaglevEnv& env,
                                                    const MaglevFeedbackGains& gains) {
  require(gains.kp > 0 && gains.kd > 0 && gains.kc > 0, "maglev feedback: gains must be positive");
  require(gains.force_min_rel > 0, "maglev feedback: force clamp must be positive");
  return std::make_unique<MaglevFeedback>(env, gains);
}

std::unique_ptr<StateFeedback> make_pendulum_swingup_lqr(const PendulumEnv& env,
                                                         const PendulumFeedbackGains& gains) {
  require(gains.capture_deg > 0 && gains.release_deg >= gains.capture_deg,
          "pendulum feedback: release angle must be >= capture angle");
  require(gains.lqr_q.size() == 4 && gains.lqr_r > 0, "pendulum feedback: bad LQR weights");
  return std::make_unique<PendulumFeedback>(env, gains);
}

PendulumLqrDesign design_pendulum_lqr(const PendulumEnv& env, const PendulumFeedbackGains& gains) {
  PendulumLqrDesign d;
  linearize([&env](const Vec& x, const Vec& u, Vec& out) { env.step_nominal(x, u, out); },
            env.x_eq(), env.u_eq(), d.A, d.B);
  const Mat Q = gains.lqr_q.asDiagonal();
  const Mat R = Mat::Constant(1, 1, gains.lqr_r);
  d.P = solve_dare(d.A, d.B, Q, R);
  d.K = dare_gain(d.A, d.B, R, d.P);
  d.residual = dare_residual(d.A, d.B, Q, R, d.P);
  return d;
}

}  // namespace ywb
