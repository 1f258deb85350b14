#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "ywb/environment.hpp"
#include "ywb/rng.hpp"

using namespace ywb;

TEST_SUITE("environment: angle utilities") {
  TEST_CASE("wrap_angle maps into (-pi, pi]") {
    CHECK_EQ(wrap_angle(0.5), doctest::Approx(0.5));
    CHECK_EQ(wrap_angle(3 * M_PI), doctest::Approx(M_PI));
    CHECK_EQ(wrap_angle(-M_PI), doctest::Approx(M_PI));  // closed at +pi
    CHECK_EQ(wrap_angle(2 * M_PI), doctest::Approx(0.0));
    CHECK_EQ(wrap_angle(-5.5 * M_PI), doctest::Approx(0.5 * M_PI));
  }
}

TEST_SUITE("environment: cost spec") {
  TEST_CASE("validate rejects an indefinite R") {
    CostSpec c;
    c.Q = Mat::Identity(1, 1);
    c.R = -Mat::Identity(1, 1);
    c.z_ref = Vec::Zero(1);
    c.u_ref = Vec::Zero(1);
    c.perf_map = [](const Vec& x, Vec& z) { z = x; };
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("control unit is the inverse square root of the heaviest input weight") {
    CostSpec c;
    c.R = Mat::Zero(2, 2);
    c.R(0, 0) = 0.04;  // 1/5^2 -> 5 units of input per unit cost
    c.R(1, 1) = 0.01;
    CHECK_EQ(c.control_unit(), doctest::Approx(5.0));
  }

  TEST_CASE("trajectory_cost equals the step-cost sum and gates the horizon") {
    MaglevEnv env;
    Vec x0 = env.x_eq();
    x0[0] += 0.01;
    testfx::StaticLinearPolicy zero(Mat::Zero(1, 2), Vec::Constant(1, env.u_eq()[0]));
    Trajectory traj = rollout(env.contract(), zero, x0, NoiseSpec::zero(3, 2),
                              env.rollout_options());
    double sum = 0.0;
    for (size_t t = 0; t + 1 < traj.states.size(); ++t)
      sum += env.step_cost(traj.states[t], traj.inputs[t]);
    CHECK_EQ(env.cost().trajectory_cost(traj), doctest::Approx(sum).epsilon(1e-12));

    Trajectory truncated = traj;
    truncated.states.pop_back();
    truncated.inputs.pop_back();
    truncated.step_costs.pop_back();
    CHECK_THROWS(env.cost().trajectory_cost(truncated));
  }
}

TEST_SUITE("environment: magnetic suspension") {
  TEST_CASE("equilibrium current balances gravity") {
    MaglevEnv env;
    const auto& p = env.params();
    // Force balance L0 a i^2 / (2 (a+y)^2) = m g solved for i.
    const double y = p.target;
    const double i_expect = (p.a + y) * std::sqrt(2.0 * p.m * p.g / (p.L0 * p.a));
    CHECK_EQ(env.equilibrium_current(y), doctest::Approx(i_expect).epsilon(1e-12));
    CHECK_EQ(env.x_eq()[2], doctest::Approx(i_expect).epsilon(1e-12));
    // Steady coil: voltage only fights resistance.
    CHECK_EQ(env.u_eq()[0], doctest::Approx(p.R * i_expect).epsilon(1e-12));
    // Inductance at the set point: L1 + L0 a / (a + y).
    CHECK_EQ(env.inductance(y), doctest::Approx(p.L1 + p.L0 * p.a / (p.a + y)).epsilon(1e-14));
  }

  TEST_CASE("set point is a fixed point of the noiseless step") {
    MaglevEnv env;
    Vec next(3);
    env.step_nominal(env.x_eq(), env.u_eq(), next);
    CHECK_LT((next - env.x_eq()).cwiseAbs().maxCoeff(), 1e-8);
  }

  TEST_CASE("cost weights and references") {
    MaglevEnv env;
    const CostSpec& c = env.cost();
    CHECK_EQ(c.Q(0, 0), doctest::Approx(1.0 / (0.025 * 0.025)));
    CHECK_EQ(c.Q(1, 1), doctest::Approx(0.0));
    CHECK_EQ(c.Q(2, 2), doctest::Approx(0.0));
    CHECK_EQ(c.R(0, 0), doctest::Approx(1.0 / (50.0 * 50.0)));
    CHECK_EQ((c.z_ref - env.x_eq()).norm(), doctest::Approx(0.0));
    CHECK_EQ((c.u_ref - env.u_eq()).norm(), doctest::Approx(0.0));
    // At the reference the stage cost vanishes.
    CHECK_EQ(env.step_cost(env.x_eq(), env.u_eq()), doctest::Approx(0.0));
    // A 0.025 m position error alone contributes exactly 1.
    Vec x = env.x_eq();
    x[0] += 0.025;
    CHECK_EQ(env.step_cost(x, env.u_eq()), doctest::Approx(1.0).epsilon(1e-12));
    // An input deviation of one control unit (50 V) also contributes 1.
    Vec u = env.u_eq();
    u[0] += env.cost().control_unit();
    CHECK_EQ(env.step_cost(env.x_eq(), u), doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("measured channels are position and current") {
    MaglevEnv env;
    REQUIRE_EQ(env.output_dim(), 2);
    Vec x(3), y(2);
    x << 0.061, -0.42, 5.5;
    env.measure(x, y);
    CHECK_EQ(y[0], 0.061);
    CHECK_EQ(y[1], 5.5);
  }

  TEST_CASE("noise levels, thresholds, and interface scales") {
    MaglevEnv env;
    CHECK_EQ(env.process_std()[0], doctest::Approx(5e-4));
    CHECK_EQ(env.measurement_std()[0], doctest::Approx(1e-3));
    CHECK_EQ(env.attack_threshold(), doctest::Approx(0.01));
    CHECK_EQ(env.cost().control_unit(), doctest::Approx(50.0));
    // Measured half-widths follow the initial-condition box.
    const Vec hw = env.measured_halfwidth();
    REQUIRE_EQ(hw.size(), 2);
    CHECK_EQ(hw[0], doctest::Approx(0.5 * (env.ic_hi()[0] - env.ic_lo()[0])));
    CHECK_EQ(hw[1], doctest::Approx(0.5 * (env.ic_hi()[2] - env.ic_lo()[2])));
  }

  TEST_CASE("initial-condition samples stay in the box and are key-deterministic") {
    MaglevEnv env;
    RngStream a(derive_stream(3, {stream_id::kInitialState, 0}));
    RngStream b(derive_stream(3, {stream_id::kInitialState, 0}));
    for (int i = 0; i < 50; ++i) {
      Vec x = env.sample_initial_state(a);
      Vec x2 = env.sample_initial_state(b);
      CHECK_EQ((x - x2).norm(), 0.0);
      for (Index j = 0; j < 3; ++j) {
        CHECK_GE(x[j], env.ic_lo()[j]);
        CHECK_LE(x[j], env.ic_hi()[j]);
      }
    }
  }

  TEST_CASE("tracking deviation is the tail-mean position offset") {
    MaglevEnv env;
    Trajectory traj;
    const int T = 10;
    for (int t = 0; t <= T; ++t) {
      Vec x = env.x_eq();
      x[0] += (t >= 6) ? 0.004 : 1.0;  // tail half sits 4 mm off target
      traj.states.push_back(x);
    }
    traj.inputs.assign(T, env.u_eq());
    traj.outputs.assign(T, Vec::Zero(2));
    traj.step_costs.assign(T, 0.0);
    CHECK_EQ(env.tracking_deviation(traj, 0.5), doctest::Approx(0.004).epsilon(1e-9));
  }

  TEST_CASE("default estimate seeding ignores the measurement") {
    MaglevEnv env;
    Vec y(2), xhat(3);
    y << 0.2, 9.9;
    env.seed_estimate(y, xhat);
    CHECK_EQ((xhat - env.estimate_init()).norm(), 0.0);
  }
}

TEST_SUITE("environment: rotary pendulum") {
  TEST_CASE("upright and hanging equilibria are fixed points") {
    PendulumEnv env;
    Vec up = Vec::Zero(4), down = Vec::Zero(4), next(4);
    down[1] = M_PI;
    env.step_nominal(up, Vec::Zero(1), next);
    CHECK_LT((next - up).cwiseAbs().maxCoeff(), 1e-8);
    env.step_nominal(down, Vec::Zero(1), next);
    // The hanging angle only needs to match modulo wrapping.
    CHECK_LT(std::abs(next[0]), 1e-8);
    CHECK_LT(std::abs(wrap_angle(next[1] - M_PI)), 1e-8);
    CHECK_LT(std::abs(next[2]), 1e-8);
    CHECK_LT(std::abs(next[3]), 1e-8);
  }

  TEST_CASE("undamped energy drift is integrator truncation of fourth order") {
    // With Dr = Dp = 0 and kt = 0 (no torque, no back-EMF braking) the
    // continuous dynamics conserve energy, so any drift is integration
    // error: it must be small and shrink ~16x when the step is halved.
    auto drift = [](double dt, int steps) {
      PendulumParams p;
      p.Dr = 0.0;
      p.Dp = 0.0;
      p.kt = 0.0;
      p.dt = dt;
      PendulumEnv env(p);
      Vec x(4), next(4);
      x << 0.3, 2.2, 0.0, 0.0;  // released from a high swing
      const double e0 = env.total_energy(x);
      double worst = 0.0;
      for (int t = 0; t < steps; ++t) {
        env.step_nominal(x, Vec::Zero(1), next);
        x = next;
        worst = std::max(worst, std::abs(env.total_energy(x) - e0));
      }
      return worst / std::abs(e0);
    };
    const double coarse = drift(0.02, 1000);  // 20 s of swinging
    const double fine = drift(0.01, 2000);
    CHECK_LT(coarse, 1e-2);
    CHECK_GT(coarse / fine, 8.0);  // 4th order predicts ~16
  }

  TEST_CASE("cost weights act on the trig embedding of the angles") {
    PendulumEnv env;
    const CostSpec& c = env.cost();
    REQUIRE_EQ(c.Q.rows(), 4);
    CHECK_EQ(c.Q(0, 0), doctest::Approx(5.0));
    CHECK_EQ(c.Q(1, 1), doctest::Approx(5.0));
    CHECK_EQ(c.Q(2, 2), doctest::Approx(10.0));
    CHECK_EQ(c.Q(3, 3), doctest::Approx(10.0));
    CHECK_EQ(c.R(0, 0), doctest::Approx(0.01));
    CHECK_EQ(env.cost().control_unit(), doctest::Approx(10.0));
    // Upright at the arm reference with zero input: zero cost.
    CHECK_EQ(env.step_cost(Vec::Zero(4), Vec::Zero(1)), doctest::Approx(0.0));
    // Hanging: the pendulum cosine term is (cos pi - 1)^2 * 10 = 40.
    Vec hang = Vec::Zero(4);
    hang[1] = M_PI;
    CHECK_EQ(env.step_cost(hang, Vec::Zero(1)), doctest::Approx(40.0).epsilon(1e-12));
    // A full arm turn is no deviation at all in the embedding.
    Vec turned = Vec::Zero(4);
    turned[0] = 2 * M_PI;
    CHECK_EQ(env.step_cost(turned, Vec::Zero(1)), doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("measurement returns the two angles, never rates") {
    PendulumEnv env;
    REQUIRE_EQ(env.output_dim(), 2);
    Vec x(4), y(2);
    x << 0.7, -1.2, 33.0, -44.0;
    env.measure(x, y);
    CHECK_EQ(y[0], 0.7);
    CHECK_EQ(y[1], -1.2);
  }

  TEST_CASE("output error wraps both angle channels") {
    PendulumEnv env;
    Vec y(2), yhat(2), err(2);
    y << M_PI - 0.1, 0.3;
    yhat << -M_PI + 0.1, 0.3 + 2 * M_PI;
    env.output_error(y, yhat, err);
    CHECK_EQ(err[0], doctest::Approx(-0.2).epsilon(1e-12));
    CHECK_EQ(err[1], doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("estimate seeding copies the measured angles and keeps prior rates") {
    PendulumEnv env;
    Vec y(2), xhat(4);
    y << 0.4, -2.8;
    env.seed_estimate(y, xhat);
    CHECK_EQ(xhat[0], 0.4);
    CHECK_EQ(xhat[1], -2.8);
    CHECK_EQ(xhat[2], env.estimate_init()[2]);
    CHECK_EQ(xhat[3], env.estimate_init()[3]);
  }

  TEST_CASE("trig embedding is wrap-invariant") {
    PendulumEnv env;
    REQUIRE_EQ(env.embed_dim(), 6);
    Vec x(4), x_wound(4), e1(6), e2(6);
    x << 0.3, -1.1, 0.2, 0.4;
    x_wound = x;
    x_wound[0] += 2 * M_PI;
    x_wound[1] -= 4 * M_PI;
    env.embed(x, e1);
    env.embed(x_wound, e2);
    CHECK_LT((e1 - e2).cwiseAbs().maxCoeff(), 1e-12);
  }

  TEST_CASE("pendulum energy is zero at upright rest and negative hanging") {
    PendulumEnv env;
    CHECK_EQ(env.pendulum_energy(Vec::Zero(4)), doctest::Approx(0.0).epsilon(1e-12));
    Vec hang = Vec::Zero(4);
    hang[1] = M_PI;
    CHECK_LT(env.pendulum_energy(hang), 0.0);
  }

  TEST_CASE("initial-condition box spans the full swing circle") {
    PendulumEnv env;
    CHECK_EQ(env.ic_lo()[1], doctest::Approx(-M_PI));
    CHECK_EQ(env.ic_hi()[1], doctest::Approx(M_PI));
    CHECK_EQ(env.ic_lo()[0], doctest::Approx(-M_PI / 2));
    CHECK_EQ(env.ic_hi()[0], doctest::Approx(M_PI / 2));
    CHECK_EQ(env.ic_hi()[2], doctest::Approx(0.5));
    CHECK_EQ(env.ic_hi()[3], doctest::Approx(0.5));
    const Vec hw = env.measured_halfwidth();
    CHECK_EQ(hw[0], doctest::Approx(M_PI / 2));
    CHECK_EQ(hw[1], doctest::Approx(M_PI));
  }

  TEST_CASE("tracking deviation measures the tail-mean upright offset") {
    PendulumEnv env;
    Trajectory traj;
    const int T = 8;
    for (int t = 0; t <= T; ++t) {
      Vec x = Vec::Zero(4);
      x[1] = (t >= 5) ? 0.2 : 3.0;  // tail holds 0.2 rad from vertical
      traj.states.push_back(x);
    }
    traj.inputs.assign(T, Vec::Zero(1));
    traj.outputs.assign(T, Vec::Zero(2));
    traj.step_costs.assign(T, 0.0);
    CHECK_EQ(env.tracking_deviation(traj, 0.5), doctest::Approx(0.2).epsilon(1e-9));
    // The break threshold is 30 degrees.
    CHECK_EQ(env.attack_threshold(), doctest::Approx(M_PI / 6).epsilon(1e-12));
  }
}

TEST_SUITE("environment: disturbance wrapper") {
  TEST_CASE("zero sequences leave the system identical") {
    MaglevEnv env;
    SystemContract plant = env.contract();
    SystemContract wrapped = apply_disturbance(plant, {}, {});
    Vec x = env.x_eq(), u = env.u_eq(), w = Vec::Zero(3), v = Vec::Zero(2);
    Vec a(3), b(3), ya(2), yb(2);
    plant.step(x, u, w, 0, a);
    wrapped.step(x, u, w, 0, b);
    CHECK_EQ((a - b).norm(), 0.0);
    plant.measure(x, v, 0, ya);
    wrapped.measure(x, v, 0, yb);
    CHECK_EQ((ya - yb).norm(), 0.0);
  }

  TEST_CASE("state and output offsets apply at their index and vanish past the end") {
    MaglevEnv env;
    SystemContract plant = env.contract();
    std::vector<Vec> dx = {Vec::Zero(3)};
    dx[0][1] = 0.5;
    std::vector<Vec> dy = {Vec::Zero(2)};
    dy[0][0] = -0.03;
    SystemContract wrapped = apply_disturbance(plant, dx, dy);
    Vec x = env.x_eq(), u = env.u_eq(), w = Vec::Zero(3), v = Vec::Zero(2);
    Vec clean(3), pushed(3), yc(2), yp(2);
    plant.step(x, u, w, 0, clean);
    wrapped.step(x, u, w, 0, pushed);
    CHECK_EQ(pushed[1] - clean[1], doctest::Approx(0.5).epsilon(1e-12));
    plant.measure(x, v, 0, yc);
    wrapped.measure(x, v, 0, yp);
    CHECK_EQ(yp[0] - yc[0], doctest::Approx(-0.03).epsilon(1e-12));
    // Past the sequence end the wrapper is transparent.
    wrapped.step(x, u, w, 5, pushed);
    CHECK_EQ((pushed - clean).norm(), 0.0);
    wrapped.measure(x, v, 5, yp);
    CHECK_EQ((yp - yc).norm(), 0.0);
  }
}
