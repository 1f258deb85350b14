#include "ywb/environment.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <memory>

namespace ywb {

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

// ----------------------------------------------------------------------------
// CostSpec
// ----------------------------------------------------------------------------

void CostSpec::validate() const {
  require(Q.rows() == Q.cols() && R.rows() == R.cols(), "cost: Q and R must be square");
  require(Q.rows() == z_ref.size(), "cost: Q/z_ref dimension mismatch");
  require(R.rows() == u_ref.size(), "cost: R/u_ref dimension mismatch");
  require(horizon >= 1, "cost: horizon must be >= 1");
  require((Q - Q.transpose()).cwiseAbs().maxCoeff() < 1e-12, "cost: Q must be symmetric");
  require((R - R.transpose()).cwiseAbs().maxCoeff() < 1e-12, "cost: R must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eq(Q), er(R);
  require(eq.eigenvalues().minCoeff() >= -1e-12, "cost: Q must be positive semidefinite");
  require(er.eigenvalues().minCoeff() > 0.0, "cost: R must be positive definite");
}

double CostSpec::control_unit() const {
  return 1.0 / std::sqrt(R.diagonal().maxCoeff());
}

double CostSpec::step_cost(const Vec& x, const Vec& u) const {
  thread_local Vec z, dz, du;
  z.resize(z_ref.size());
  perf_map(x, z);
  dz = z - z_ref;
  du = u - u_ref;
  return dz.dot(Q * dz) + du.dot(R * du);
}

double CostSpec::trajectory_cost(const Trajectory& traj) const {
  require(static_cast<int>(traj.inputs.size()) == horizon,
          "cost: trajectory horizon does not match the cost spec");
  double sum = 0.0;
  for (int t = 0; t < horizon; ++t) sum += step_cost(traj.states[t], traj.inputs[t]);
  return sum;
}

// ----------------------------------------------------------------------------
// Env base
// ----------------------------------------------------------------------------

void Env::output_error(const Vec& y, const Vec& yhat, Vec& err) const {
  err = y - yhat;
}

void Env::step_nominal(const Vec& x, const Vec& u, Vec& out) const {
  rk4_step([this](const Vec& xs, const Vec& us, Vec& dx) { rhs(xs, us, dx); }, dt_, x, u, out);
}

SystemContract Env::contract() const {
  SystemContract sys;
  sys.state_dim = state_dim_;
  sys.input_dim = input_dim_;
  sys.output_dim = output_dim_;
  sys.step = [this](const Vec& x, const Vec& u, const Vec& w, int, Vec& out) {
    step_nominal(x, u, out);
    out += w;
  };
  sys.measure = [this](const Vec& x, const Vec& v, int, Vec& out) {
    measure(x, out);
    out += v;
  };
  return sys;
}

Vec Env::sample_initial_state(RngStream& rng) const {
  Vec x(state_dim_);
  for (Index i = 0; i < state_dim_; ++i) x[i] = rng.next_uniform(ic_lo_[i], ic_hi_[i]);
  return x;
}

Vec Env::measured_halfwidth() const {
  Vec lo(output_dim_), hi(output_dim_);
  measure(ic_lo_, lo);
  measure(ic_hi_, hi);
  Vec half = 0.5 * (hi - lo).cwiseAbs();
  for (Index i = 0; i < half.size(); ++i)
    if (half[i] <= 0.0) half[i] = 1.0;
  return half;
}

// Index of the first state row inside the scored trajectory tail.
static int tail_start(const Trajectory& traj, double tail_fraction) {
  require(tail_fraction > 0.0 && tail_fraction <= 1.0,
          "tracking deviation: tail fraction must be in (0, 1]");
  const int T = static_cast<int>(traj.states.size()) - 1;
  require(T >= 1, "tracking deviation: trajectory too short");
  int start = T - static_cast<int>(std::lround(T * tail_fraction)) + 1;
  return std::clamp(start, 0, T);
}

double Env::tracking_deviation(const Trajectory& traj, double tail_fraction) const {
  const int start = tail_start(traj, tail_fraction);
  const int T = static_cast<int>(traj.states.size()) - 1;
  thread_local Vec z;
  z.resize(cost_.z_ref.size());
  Vec mean = Vec::Zero(cost_.z_ref.size());
  for (int t = start; t <= T; ++t) {
    cost_.perf_map(traj.states[t], z);
    mean += z;
  }
  mean /= static_cast<double>(T - start + 1);
  return (mean - cost_.z_ref).norm();
}

RolloutOptions Env::rollout_options() const {
  RolloutOptions opt;
  opt.horizon = cost_.horizon;
  opt.step_cost = [this](const Vec& x, const Vec& u) { return cost_.step_cost(x, u); };
  opt.box_lo = box_lo_;
  opt.box_hi = box_hi_;
  opt.divergence_penalty = divergence_penalty_;
  return opt;
}

void Env::finalize() {
  require(state_dim_ > 0 && input_dim_ > 0 && output_dim_ > 0, name_ + ": bad dimensions");
  require(dt_ > 0.0, name_ + ": dt must be positive");
  require(process_std_.size() == state_dim_ && process_std_.minCoeff() >= 0.0,
          name_ + ": invalid process noise spec");
  require(measurement_std_.size() == output_dim_ && measurement_std_.minCoeff() >= 0.0,
          name_ + ": invalid measurement noise spec");
  require(ic_lo_.size() == state_dim_ && ic_hi_.size() == state_dim_ &&
              (ic_hi_ - ic_lo_).minCoeff() >= 0.0,
          name_ + ": invalid initial-condition box");
  require(box_lo_.size() == state_dim_ && box_hi_.size() == state_dim_ &&
              (box_hi_ - box_lo_).minCoeff() > 0.0,
          name_ + ": invalid divergence box");
  require(r_bound_ >= 0.0, name_ + ": input excitation bound must be >= 0");
  cost_.validate();

  // Observer structure must partition the state set.
  std::vector<int> seen(static_cast<std::size_t>(state_dim_), 0);
  for (const auto& chain : obs_structure_.chains) {
    require(chain.output_index >= 0 && chain.output_index < output_dim_,
            name_ + ": observer chain output index out of range");
    for (int s : chain.state_indices) {
      require(s >= 0 && s < state_dim_, name_ + ": observer chain state index out of range");
      seen[static_cast<std::size_t>(s)] += 1;
    }
  }
  for (int count : seen) require(count == 1, name_ + ": observer chains must cover each state once");
}

// ----------------------------------------------------------------------------
// Magnetic suspension
// ----------------------------------------------------------------------------

MaglevEnv::MaglevEnv(const MaglevParams& p) : p_(p) {
  name_ = "maglev";
  dt_ = p.dt;
  state_dim_ = 3;
  input_dim_ = 1;
  output_dim_ = 2;

  const double i_eq = equilibrium_current(p.target);
  x_eq_ = Vec(3);
  x_eq_ << p.target, 0.0, i_eq;
  u_eq_ = Vec(1);
  u_eq_ << p.R * i_eq;  // steady coil: v = R i
  estimate_init_ = x_eq_;

  process_std_ = Vec::Constant(3, p.process_noise);
  measurement_std_ = Vec::Constant(2, p.measurement_noise);

  ic_lo_ = Vec(3);
  ic_hi_ = Vec(3);
  ic_lo_ << p.target - 0.02, -0.05, 0.8 * i_eq;
  ic_hi_ << p.target + 0.02, 0.05, 1.2 * i_eq;

  // The model is physical only for positions above the magnet face; the box
  // also bounds runaway currents so diverging rollouts are cut off early.
  box_lo_ = Vec(3);
  box_hi_ = Vec(3);
  box_lo_ << -0.04, -10.0, -100.0;
  box_hi_ << 0.5, 10.0, 100.0;

  r_bound_ = 1.0;  // volts

  cost_.Q = Mat::Zero(3, 3);
  cost_.Q(0, 0) = 1.0 / (0.025 * 0.025);
  cost_.R = Mat::Constant(1, 1, 1.0 / (50.0 * 50.0));
  cost_.z_ref = x_eq_;
  cost_.u_ref = u_eq_;
  cost_.perf_map = [](const Vec& x, Vec& z) { z = x; };
  cost_.horizon = p.horizon;

  obs_structure_.chains = {{0, {0, 1}}, {1, {2}}};

  finalize();
}

double MaglevEnv::inductance(double y) const { return p_.L1 + p_.L0 * p_.a / (p_.a + y); }

double MaglevEnv::equilibrium_current(double y) const {
  // Force balance  L0 a i^2 / (2 (a+y)^2) = m g.
  return (p_.a + y) * std::sqrt(2.0 * p_.m * p_.g / (p_.L0 * p_.a));
}

void MaglevEnv::rhs(const Vec& x, const Vec& u, Vec& dx) const {
  const double pos = x[0], vel = x[1], cur = x[2];
  const double ay = p_.a + pos;
  const double force = p_.L0 * p_.a * cur * cur / (2.0 * ay * ay);
  dx[0] = vel;
  dx[1] = p_.g - (p_.k / p_.m) * vel - force / p_.m;
  // Coil circuit: d/dt [L(y) i] = -R i + v, with dL/dy = -L0 a/(a+y)^2.
  const double dL_dy = -p_.L0 * p_.a / (ay * ay);
  dx[2] = (u[0] - p_.R * cur - dL_dy * vel * cur) / inductance(pos);
}

void MaglevEnv::measure(const Vec& x, Vec& y) const {
  y[0] = x[0];
  y[1] = x[2];
}

double MaglevEnv::tracking_deviation(const Trajectory& traj, double tail_fraction) const {
  const int start = tail_start(traj, tail_fraction);
  const int T = static_cast<int>(traj.states.size()) - 1;
  double mean_pos = 0.0;
  for (int t = start; t <= T; ++t) mean_pos += traj.states[t][0];
  mean_pos /= static_cast<double>(T - start + 1);
  return std::abs(mean_pos - p_.target);
}

// ----------------------------------------------------------------------------
// Furuta pendulum
// ----------------------------------------------------------------------------

PendulumEnv::PendulumEnv(const PendulumParams& p) : p_(p) {
  name_ = "pendulum";
  dt_ = p.dt;
  state_dim_ = 4;
  input_dim_ = 1;
  output_dim_ = 2;

  lp_ = 0.5 * p.Lp;
  const double Jr = p.mr * p.Lr * p.Lr / 3.0 + p.Jm;
  J0_ = Jr + p.mp * p.Lr * p.Lr;
  J2_ = p.mp * p.Lp * p.Lp / 3.0;
  mLrlp_ = p.mp * p.Lr * lp_;

  x_eq_ = Vec::Zero(4);  // arm at reference, pendulum upright
  u_eq_ = Vec::Zero(1);
  estimate_init_ = Vec(4);
  estimate_init_ << 0.0, M_PI, 0.0, 0.0;  // assume hanging until measured

  process_std_ = Vec::Constant(4, p.process_noise);
  measurement_std_ = Vec::Constant(2, p.measurement_noise);

  ic_lo_ = Vec(4);
  ic_hi_ = Vec(4);
  ic_lo_ << -M_PI / 2.0, -M_PI, -0.5, -0.5;
  ic_hi_ << M_PI / 2.0, M_PI, 0.5, 0.5;

  box_lo_ = Vec(4);
  box_hi_ = Vec(4);
  box_lo_ << -50.0, -50.0, -200.0, -200.0;
  box_hi_ << 50.0, 50.0, 200.0, 200.0;

  r_bound_ = 1.0;  // volts

  cost_.Q = Mat::Zero(4, 4);
  cost_.Q.diagonal() << 5.0, 5.0, 10.0, 10.0;
  cost_.R = Mat::Constant(1, 1, 0.01);
  cost_.z_ref = Vec(4);
  cost_.z_ref << 1.0, 0.0, 1.0, 0.0;  // (cos, sin) of both angles at reference
  cost_.u_ref = Vec::Zero(1);
  cost_.perf_map = [](const Vec& x, Vec& z) {
    z[0] = std::cos(x[0]);
    z[1] = std::sin(x[0]);
    z[2] = std::cos(x[1]);
    z[3] = std::sin(x[1]);
  };
  cost_.horizon = p.horizon;

  obs_structure_.chains = {{0, {0, 2}}, {1, {1, 3}}};

  finalize();
}

void PendulumEnv::rhs(const Vec& x, const Vec& u, Vec& dx) const {
  const double th_dot = x[2], al = x[1], al_dot = x[3];
  const double sa = std::sin(al), ca = std::cos(al);

  // Mass matrix [[m11, m12], [m12, m22]] and generalized forces.
  const double m11 = J0_ + J2_ * sa * sa;
  const double m12 = mLrlp_ * ca;
  const double m22 = J2_;
  const double torque = p_.kt * (u[0] - p_.km * th_dot) / p_.Rm;
  const double f1 = torque - p_.Dr * th_dot - 2.0 * J2_ * sa * ca * th_dot * al_dot +
                    mLrlp_ * sa * al_dot * al_dot;
  const double f2 = -p_.Dp * al_dot + J2_ * sa * ca * th_dot * th_dot +
                    p_.mp * p_.g * lp_ * sa;

  const double det = m11 * m22 - m12 * m12;
  dx[0] = th_dot;
  dx[1] = al_dot;
  dx[2] = (m22 * f1 - m12 * f2) / det;
  dx[3] = (m11 * f2 - m12 * f1) / det;
}

void PendulumEnv::measure(const Vec& x, Vec& y) const {
  y[0] = x[0];
  y[1] = x[1];
}

void PendulumEnv::seed_estimate(const Vec& y, Vec& xhat) const {
  xhat = estimate_init();
  xhat[0] = y[0];  // both angles are measured; rates start at rest
  xhat[1] = y[1];
}

void PendulumEnv::output_error(const Vec& y, const Vec& yhat, Vec& err) const {
  err[0] = wrap_angle(y[0] - yhat[0]);
  err[1] = wrap_angle(y[1] - yhat[1]);
}

void PendulumEnv::embed(const Vec& x, Vec& e) const {
  e[0] = std::cos(x[0]);
  e[1] = std::sin(x[0]);
  e[2] = std::cos(x[1]);
  e[3] = std::sin(x[1]);
  e[4] = x[2];
  e[5] = x[3];
}

double PendulumEnv::total_energy(const Vec& x) const {
  const double sa = std::sin(x[1]), ca = std::cos(x[1]);
  const double th_dot = x[2], al_dot = x[3];
  const double kinetic = 0.5 * (J0_ + J2_ * sa * sa) * th_dot * th_dot +
                         mLrlp_ * ca * th_dot * al_dot + 0.5 * J2_ * al_dot * al_dot;
  const double potential = p_.mp * p_.g * lp_ * ca;
  return kinetic + potential;
}

double PendulumEnv::pendulum_energy(const Vec& x) const {
  const double ca = std::cos(x[1]);
  return 0.5 * J2_ * x[3] * x[3] + p_.mp * p_.g * lp_ * (ca - 1.0);
}

double PendulumEnv::tracking_deviation(const Trajectory& traj, double tail_fraction) const {
  const int start = tail_start(traj, tail_fraction);
  const int T = static_cast<int>(traj.states.size()) - 1;
  double mean_abs = 0.0;
  for (int t = start; t <= T; ++t) mean_abs += std::abs(wrap_angle(traj.states[t][1]));
  return mean_abs / static_cast<double>(T - start + 1);
}

double PendulumEnv::attack_threshold() const { return M_PI / 6.0; }

// ----------------------------------------------------------------------------
// Disturbance wrapper
// ----------------------------------------------------------------------------

SystemContract apply_disturbance(const SystemContract& plant,
                                 const std::vector<Vec>& d_x,
                                 const std::vector<Vec>& d_y) {
  for (const auto& d : d_x)
    require(d.size() == plant.state_dim, "apply_disturbance: d_x dimension mismatch");
  for (const auto& d : d_y)
    require(d.size() == plant.output_dim, "apply_disturbance: d_y dimension mismatch");

  SystemContract sys = plant;
  const auto dx = std::make_shared<std::vector<Vec>>(d_x);
  const auto dy = std::make_shared<std::vector<Vec>>(d_y);
  const auto base_step = plant.step;
  const auto base_measure = plant.measure;
  sys.step = [base_step, dx](const Vec& x, const Vec& u, const Vec& w, int t, Vec& out) {
    base_step(x, u, w, t, out);
    if (t >= 0 && static_cast<std::size_t>(t) < dx->size()) out += (*dx)[static_cast<std::size_t>(t)];
  };
  sys.measure = [base_measure, dy](const Vec& x, const Vec& v, int t, Vec& out) {
    base_measure(x, v, t, out);
    if (t >= 0 && static_cast<std::size_t>(t) < dy->size()) out += (*dy)[static_cast<std::size_t>(t)];
  };
  return sys;
}

}  // namespace ywb
