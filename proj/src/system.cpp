#include "ywb/system.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>

#include "ywb/parallel.hpp"

namespace ywb {

void rk4_step(const ContinuousRhs& rhs, double dt, const Vec& x, const Vec& u, Vec& out) {
  const Index n = x.size();
  // Scratch space is reused across calls: this sits inside every simulation
  // loop, so per-call allocation would dominate the step cost.
  thread_local Vec k1, k2, k3, k4, tmp;
  k1.resize(n);
  k2.resize(n);
  k3.resize(n);
  k4.resize(n);
  tmp.resize(n);
  rhs(x, u, k1);
  tmp = x + (0.5 * dt) * k1;
  rhs(tmp, u, k2);
  tmp = x + (0.5 * dt) * k2;
  rhs(tmp, u, k3);
  tmp = x + dt * k3;
  rhs(tmp, u, k4);
  out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

SystemContract discretize(const ContinuousRhs& rhs, double dt, Index state_dim, Index input_dim) {
  require(dt > 0.0, "discretize: dt must be positive");
  SystemContract sys;
  sys.state_dim = state_dim;
  sys.input_dim = input_dim;
  sys.output_dim = state_dim;
  sys.step = [rhs, dt](const Vec& x, const Vec& u, const Vec& w, int, Vec& out) {
    rk4_step(rhs, dt, x, u, out);
    out += w;
  };
  sys.measure = [](const Vec& x, const Vec& v, int, Vec& out) { out = x + v; };
  return sys;
}

NoiseSpec NoiseSpec::zero(Index state_dim, Index output_dim) {
  NoiseSpec n;
  n.process_std = Vec::Zero(state_dim);
  n.measurement_std = Vec::Zero(output_dim);
  n.stream = 0;
  return n;
}

double Trajectory::total_cost() const {
  return std::accumulate(step_costs.begin(), step_costs.end(), 0.0);
}

namespace {

bool inside_box(const Vec& x, const Vec& lo, const Vec& hi) {
  if (!x.allFinite()) return false;
  if (lo.size() == 0) return true;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  }
  return true;
}

}  // namespace

Trajectory rollout(const SystemContract& system, Policy& policy, const Vec& x0,
                   const NoiseSpec& noise, const RolloutOptions& options) {
  require(x0.size() == system.state_dim, "rollout: x0 dimension mismatch");
  require(noise.process_std.size() == system.state_dim,
          "rollout: process_std dimension mismatch");
  require(noise.measurement_std.size() == system.output_dim,
          "rollout: measurement_std dimension mismatch");

  const int T = options.horizon;
  Trajectory traj;
  traj.states.reserve(T + 1);
  traj.inputs.reserve(T);
  traj.outputs.reserve(T);
  traj.step_costs.reserve(T);

  RngStream rng(noise.stream);
  Vec x = x0;
  Vec v(system.output_dim), w(system.state_dim);
  Vec y(system.output_dim), u(system.input_dim), r(system.input_dim), x_next(system.state_dim);
  const Vec zero_u = Vec::Zero(system.input_dim);
  const Vec zero_y = Vec::Zero(system.output_dim);

  policy.reset();
  traj.states.push_back(x);

  for (int t = 0; t < T; ++t) {
    if (traj.diverged) {
      traj.states.push_back(x);
      traj.inputs.push_back(zero_u);
      traj.outputs.push_back(zero_y);
      traj.step_costs.push_back(options.divergence_penalty);
      continue;
    }

    rng.fill_scaled_gaussian(noise.measurement_std, v);
    system.measure(x, v, t, y);

    if (options.reference) {
      options.reference(t, r);
    } else {
      r.setZero();
    }
    policy.step(y, r, u);

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

    rng.fill_scaled_gaussian(noise.process_std, w);
    u += r;  // plant input is policy output plus exogenous excitation
    system.step(x, u, w, t, x_next);

    if (!inside_box(x_next, options.box_lo, options.box_hi)) {
      traj.diverged = true;
      traj.diverged_at = t + 1;
      if (!x_next.allFinite()) x_next = x;  // keep the log printable
    }
    x = x_next;
    traj.states.push_back(x);
  }
  return traj;
}

std::vector<Trajectory> batch_rollout(const SystemContract& system, const Policy& prototype,
                                      const std::vector<Vec>& initial_states,
                                      const std::vector<std::uint64_t>& noise_keys,
                                      const Vec& process_std, const Vec& measurement_std,
                                      const RolloutOptions& options) {
  require(initial_states.size() == noise_keys.size(),
          "batch_rollout: initial state / noise key count mismatch");
  std::vector<Trajectory> out(initial_states.size());
  parallel_for(initial_states.size(), [&](std::size_t i) {
    NoiseSpec noise;
    noise.process_std = process_std;
    noise.measurement_std = measurement_std;
    noise.stream = noise_keys[i];
    auto policy = prototype.clone();
    out[i] = rollout(system, *policy, initial_states[i], noise, options);
  });
  return out;
}

double mean_total_cost(const std::vector<Trajectory>& trajectories) {
  require(!trajectories.empty(), "mean_total_cost: empty batch");
  double sum = 0.0;
  for (const auto& t : trajectories) sum += t.total_cost();
  return sum / static_cast<double>(trajectories.size());
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  require(out.good(), "write_trajectory_csv: cannot open " + path);
  const Index nx = traj.states.empty() ? 0 : traj.states.front().size();
  const Index nu = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  const Index ny = traj.outputs.empty() ? 0 : traj.outputs.front().size();

  out << "t";
  for (Index i = 0; i < nx; ++i) out << ",x_" << i;
  for (Index i = 0; i < nu; ++i) out << ",u_" << i;
  for (Index i = 0; i < ny; ++i) out << ",y_" << i;
  out << ",cost\n";

  char buf[32];
  auto emit = [&](double value) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out << ',' << buf;
  };
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    out << t;
    for (Index i = 0; i < nx; ++i) emit(traj.states[t][i]);
    for (Index i = 0; i < nu; ++i) emit(traj.inputs[t][i]);
    for (Index i = 0; i < ny; ++i) emit(traj.outputs[t][i]);
    emit(traj.step_costs[t]);
    out << '\n';
  }
}

}  // namespace ywb
