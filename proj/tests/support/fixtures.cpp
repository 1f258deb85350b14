#include "support/fixtures.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "ywb/rng.hpp"

namespace ywb::testfx {

// ----------------------------------------------------------------------------
// LinearFixture
// ----------------------------------------------------------------------------

LinearFixture make_linear_fixture(const Mat& A, const Mat& B, const Mat& C) {
  require(A.rows() == A.cols(), "linear fixture: A must be square");
  require(B.rows() == A.rows() && C.cols() == A.rows(), "linear fixture: dimension mismatch");
  LinearFixture f;
  f.A = A;
  f.B = B;
  f.C = C;
  f.spectral_radius = A.eigenvalues().cwiseAbs().maxCoeff();
  f.stable = f.spectral_radius < 1.0;
  return f;
}

LinearFixture make_scalar_fixture(double a, double b, double c) {
  Mat A(1, 1), B(1, 1), C(1, 1);
  A << a;
  B << b;
  C << c;
  return make_linear_fixture(A, B, C);
}

Vec LinearFixture::state_at(const Vec& x0, const std::vector<Vec>& inputs, int t) const {
  Vec x = x0;
  for (int k = 0; k < t; ++k) {
    Vec u = k < static_cast<int>(inputs.size()) ? inputs[k] : Vec::Zero(B.cols()).eval();
    x = A * x + B * u;
  }
  return x;
}

Vec LinearFixture::fixed_point(const Vec& u) const {
  require(stable, "linear fixture: fixed point needs a stable map");
  const Mat I = Mat::Identity(A.rows(), A.cols());
  return (I - A).lu().solve(B * u);
}

AuditSystem LinearFixture::audit() const {
  AuditSystem sys;
  sys.state_dim = A.rows();
  sys.input_dim = B.cols();
  sys.output_dim = C.rows();
  const LinearFixture f = *this;  // value capture: the audit outlives callers
  sys.simulate = [f](const Vec& x0, const std::vector<Vec>& inputs, AuditTrace& trace) {
    trace.states.clear();
    trace.outputs.clear();
    Vec x = x0;
    trace.states.push_back(x);
    for (const Vec& u : inputs) {
      trace.outputs.push_back(f.C * x);
      x = f.A * x + f.B * u;
      trace.states.push_back(x);
    }
  };
  return sys;
}

// ----------------------------------------------------------------------------
// StaticLinearPolicy
// ----------------------------------------------------------------------------

StaticLinearPolicy::StaticLinearPolicy(const Mat& K, const Vec& bias) : K_(K), bias_(bias) {
  require(bias_.size() == K_.rows(), "static policy: bias dimension mismatch");
}

StaticLinearPolicy::StaticLinearPolicy(const Mat& K)
    : StaticLinearPolicy(K, Vec::Zero(K.rows())) {}

void StaticLinearPolicy::step(const Vec& y, const Vec&, Vec& u_out) {
  u_out = K_ * y + bias_;
}

std::unique_ptr<Policy> StaticLinearPolicy::clone() const {
  return std::make_unique<StaticLinearPolicy>(K_, bias_);
}

// ----------------------------------------------------------------------------
// ThresholdEnv
// ----------------------------------------------------------------------------

ThresholdEnv::ThresholdEnv() {
  name_ = "threshold-fixture";
  dt_ = 1.0;
  state_dim_ = input_dim_ = output_dim_ = 1;
  process_std_ = Vec::Zero(1);
  measurement_std_ = Vec::Zero(1);
  x_eq_ = Vec::Zero(1);
  u_eq_ = Vec::Zero(1);
  estimate_init_ = Vec::Zero(1);
  ic_lo_ = Vec::Zero(1);
  ic_hi_ = Vec::Zero(1);
  box_lo_ = Vec::Constant(1, -1e6);
  box_hi_ = Vec::Constant(1, 1e6);
  r_bound_ = 1.0;
  cost_.Q = Mat::Identity(1, 1);
  cost_.R = Mat::Identity(1, 1) * 1e-6;
  cost_.z_ref = Vec::Zero(1);
  cost_.u_ref = Vec::Zero(1);
  cost_.perf_map = [](const Vec& x, Vec& z) { z = x; };
  cost_.horizon = 60;
  ObserverStructure::Chain chain;
  chain.output_index = 0;
  chain.state_indices = {0};
  obs_structure_.chains = {chain};
  finalize();
}

void ThresholdEnv::rhs(const Vec& x, const Vec& u, Vec& dx) const {
  dx.resize(1);
  dx[0] = -x[0] + u[0];
}

void ThresholdEnv::measure(const Vec& x, Vec& y) const { y = x; }

double ThresholdEnv::tracking_deviation(const Trajectory& traj, double tail_fraction) const {
  const int T = static_cast<int>(traj.states.size()) - 1;
  if (T < 1) return 0.0;
  const int start = std::clamp(T - static_cast<int>(std::lround(T * tail_fraction)) + 1, 0, T);
  double sum = 0.0;
  for (int t = start; t <= T; ++t) sum += std::abs(traj.states[t][0]);
  return sum / static_cast<double>(T - start + 1);
}

// ----------------------------------------------------------------------------
// Stacked closed-loop oracle
// ----------------------------------------------------------------------------

Trajectory stacked_oracle_rollout(const Env& env, const HighGainObserver& observer,
                                  const HighGainObserver* innovations_observer,
                                  const StateFeedback& feedback, SequenceModel* q_model,
                                  const Vec& x0, std::uint64_t noise_key,
                                  const std::function<void(int, Vec&)>& reference) {
  const Index n = env.state_dim(), m = env.input_dim(), p = env.output_dim();
  const int T = env.horizon();
  const double dt = env.dt();

  Trajectory traj;
  RngStream rng(noise_key);
  auto fbk = feedback.clone();
  fbk->reset();
  if (q_model) q_model->reset();

  Vec x = x0;
  Vec xhat = env.estimate_init();
  Vec xinno = env.estimate_init();
  Vec v(p), w(n), y(p), yhat(p), ytil(p), r(m), ubar(m), util = Vec::Zero(m), u(m), utot(m);
  Vec qin(m + p), xn(n), xhn(n), xin(n);

  traj.states.push_back(x);
  for (int t = 0; t < T; ++t) {
    // Measurement.
    rng.fill_scaled_gaussian(env.measurement_std(), v);
    env.measure(x, y);
    y += v;
    if (reference) {
      reference(t, r);
    } else {
      r.setZero();
    }

    // Correction from the innovations channel (innovation against the
    // pre-seed estimate on the first step).
    if (q_model) {
      const Vec& xi = innovations_observer ? xinno : xhat;
      env.measure(xi, yhat);
      env.output_error(y, yhat, ytil);
      qin.head(m) = r;
      qin.tail(p) = ytil;
      q_model->step(qin, util);
    } else {
      util.setZero();
    }

    // First measurement seeds the control estimate; the innovations filter
    // keeps its prior start.
    if (t == 0) env.seed_estimate(y, xhat);

    // Control and bookkeeping.
    fbk->control(xhat, ubar);
    u = ubar + util;
    traj.inputs.push_back(u);
    traj.outputs.push_back(y);
    traj.step_costs.push_back(env.step_cost(x, u));

    // Plant and observer advance on the same applied input.
    rng.fill_scaled_gaussian(env.process_std(), w);
    utot = u + r;
    env.step_nominal(x, utot, xn);
    xn += w;

    env.measure(xhat, yhat);
    env.output_error(y, yhat, ytil);
    env.step_nominal(xhat, utot, xhn);
    xhn.noalias() += dt * (observer.gain() * ytil);

    if (innovations_observer) {
      env.measure(xinno, yhat);
      env.output_error(y, yhat, ytil);
      env.step_nominal(xinno, utot, xin);
      xin.noalias() += dt * (innovations_observer->gain() * ytil);
      xinno.swap(xin);
    }

    x.swap(xn);
    xhat.swap(xhn);
    traj.states.push_back(x);
  }
  return traj;
}

std::vector<double> oracle_observer_error(const Env& env, const HighGainObserver& observer,
                                          const StateFeedback& feedback, SequenceModel* q_model,
                                          const Vec& x0, std::uint64_t noise_key) {
  const Index n = env.state_dim(), m = env.input_dim(), p = env.output_dim();
  const int T = env.horizon();
  const double dt = env.dt();
  const bool with_noise = noise_key != 0;

  RngStream rng(noise_key);
  auto fbk = feedback.clone();
  fbk->reset();
  if (q_model) q_model->reset();

  Vec x = x0;
  Vec xhat = with_noise ? env.estimate_init() : x0;  // exact start when noiseless
  Vec v = Vec::Zero(p), w = Vec::Zero(n);
  Vec y(p), yhat(p), ytil(p), ubar(m), util = Vec::Zero(m), utot(m), qin(m + p), xn(n), xhn(n);
  std::vector<double> err;
  err.push_back((xhat - x).norm());

  for (int t = 0; t < T; ++t) {
    if (with_noise) rng.fill_scaled_gaussian(env.measurement_std(), v);
    env.measure(x, y);
    y += v;

    if (q_model) {
      env.measure(xhat, yhat);
      env.output_error(y, yhat, ytil);
      qin.head(m).setZero();
      qin.tail(p) = ytil;
      q_model->step(qin, util);
    }
    if (t == 0 && with_noise) env.seed_estimate(y, xhat);
    fbk->control(xhat, ubar);
    utot = ubar + util;

    if (with_noise) rng.fill_scaled_gaussian(env.process_std(), w);
    env.step_nominal(x, utot, xn);
    xn += w;
    env.measure(xhat, yhat);
    env.output_error(y, yhat, ytil);
    env.step_nominal(xhat, utot, xhn);
    xhn.noalias() += dt * (observer.gain() * ytil);

    x.swap(xn);
    xhat.swap(xhn);
    err.push_back((xhat - x).norm());
  }
  return err;
}

}  // namespace ywb::testfx
