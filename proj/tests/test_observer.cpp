#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "ywb/config.hpp"
#include "ywb/observer.hpp"
#include "ywb/rng.hpp"

using namespace ywb;

TEST_SUITE("observer: predictor exactness") {
  // The correction term vanishes when y = c(x̂), so the predictor restricted
  // to true states must coincide with the plant's own step map.
  TEST_CASE("predictor equals the plant step on true states") {
    auto sweep = [](const Env& env, double eps) {
      HighGainObserver obs(env, eps);
      RngStream rng(derive_stream(7, {stream_id::kInitialState, 99}));
      Vec y(env.output_dim()), from_obs(env.state_dim()), from_plant(env.state_dim());
      for (int i = 0; i < 100; ++i) {
        Vec x = env.sample_initial_state(rng);
        Vec u = Vec::Zero(env.input_dim());
        for (Index j = 0; j < u.size(); ++j)
          u[j] = env.u_eq()[j] + env.cost().control_unit() * rng.next_gaussian();
        env.measure(x, y);
        obs.predict(x, u, y, from_obs);
        env.step_nominal(x, u, from_plant);
        CHECK_LT((from_obs - from_plant).cwiseAbs().maxCoeff(), 1e-12);
      }
    };
    sweep(MaglevEnv(), 0.02);
    sweep(PendulumEnv(), 0.05);
  }

  TEST_CASE("equilibrium is a fixed point of the predictor") {
    MaglevEnv env;
    HighGainObserver obs(env, 0.02);
    Vec y(2), next(3);
    env.measure(env.x_eq(), y);
    obs.predict(env.x_eq(), env.u_eq(), y, next);
    CHECK_LT((next - env.x_eq()).cwiseAbs().maxCoeff(), 1e-8);
  }

  TEST_CASE("predicted output is the measurement map") {
    PendulumEnv env;
    HighGainObserver obs(env, 0.05);
    Vec x(4), want(2), got(2);
    x << 0.2, -1.0, 3.0, 4.0;
    env.measure(x, want);
    obs.predicted_output(x, got);
    CHECK_EQ((want - got).norm(), 0.0);
  }
}

TEST_SUITE("observer: gain placement") {
  TEST_CASE("suspension gains follow the repeated-pole pattern") {
    MaglevEnv env;
    const double eps = 0.02;
    HighGainObserver obs(env, eps);
    const Mat& H = obs.gain();
    REQUIRE_EQ(H.rows(), 3);
    REQUIRE_EQ(H.cols(), 2);
    // Position chain (position, velocity) driven by the position output:
    // coefficients of (s + 1/eps)^2 give 2/eps then 1/eps^2.
    CHECK_EQ(H(0, 0), doctest::Approx(2.0 / eps).epsilon(1e-12));
    CHECK_EQ(H(1, 0), doctest::Approx(1.0 / (eps * eps)).epsilon(1e-12));
    // Current chain of length one: 1/eps.
    CHECK_EQ(H(2, 1), doctest::Approx(1.0 / eps).epsilon(1e-12));
    // No cross-coupling.
    CHECK_EQ(H(0, 1), 0.0);
    CHECK_EQ(H(1, 1), 0.0);
    CHECK_EQ(H(2, 0), 0.0);
    CHECK_EQ(obs.gain_eps(), eps);
  }

  TEST_CASE("pendulum gains drive each angle chain from its own output") {
    PendulumEnv env;
    const double eps = 0.05;
    HighGainObserver obs(env, eps);
    const Mat& H = obs.gain();
    // State order (arm angle, pendulum angle, arm rate, pendulum rate):
    // output 0 corrects states 0 and 2, output 1 corrects states 1 and 3.
    CHECK_EQ(H(0, 0), doctest::Approx(2.0 / eps).epsilon(1e-12));
    CHECK_EQ(H(2, 0), doctest::Approx(1.0 / (eps * eps)).epsilon(1e-12));
    CHECK_EQ(H(1, 1), doctest::Approx(2.0 / eps).epsilon(1e-12));
    CHECK_EQ(H(3, 1), doctest::Approx(1.0 / (eps * eps)).epsilon(1e-12));
    CHECK_EQ(H(0, 1), 0.0);
    CHECK_EQ(H(2, 1), 0.0);
    CHECK_EQ(H(1, 0), 0.0);
    CHECK_EQ(H(3, 0), 0.0);
  }

  TEST_CASE("explicit chain gains override the binomial defaults") {
    MaglevEnv env;
    const double eps = 0.03;
    HighGainObserver obs(env, eps, {{3.0, 2.0}, {5.0}});
    const Mat& H = obs.gain();
    CHECK_EQ(H(0, 0), doctest::Approx(3.0 / eps).epsilon(1e-12));
    CHECK_EQ(H(1, 0), doctest::Approx(2.0 / (eps * eps)).epsilon(1e-12));
    CHECK_EQ(H(2, 1), doctest::Approx(5.0 / eps).epsilon(1e-12));
  }

  TEST_CASE("gain lists must match the chain structure") {
    MaglevEnv env;
    CHECK_THROWS(HighGainObserver(env, 0.1, {{1.0, 2.0}}));         // one list missing
    CHECK_THROWS(HighGainObserver(env, 0.1, {{1.0}, {1.0}}));       // wrong chain length
    CHECK_THROWS(HighGainObserver(env, 0.0));                       // eps must be positive
  }
}

TEST_SUITE("observer: innovation convention") {
  TEST_CASE("pendulum innovation is wrap-invariant") {
    PendulumEnv env;
    HighGainObserver obs(env, 0.05);
    Vec xhat(4), u(1), y(2), y_wound(2), a(4), b(4);
    xhat << 0.3, 3.0, 0.1, -0.2;
    u << 1.5;
    y << 0.5, -3.0;
    y_wound = y;
    y_wound[0] += 2 * M_PI;
    y_wound[1] -= 4 * M_PI;
    obs.predict(xhat, u, y, a);
    obs.predict(xhat, u, y_wound, b);
    CHECK_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST_SUITE("observer: detuning") {
  TEST_CASE("slow factor one reproduces the observer exactly") {
    MaglevEnv env;
    HighGainObserver obs(env, 0.02);
    HighGainObserver same = obs.detuned(1.0);
    CHECK_EQ((same.gain() - obs.gain()).norm(), 0.0);
    CHECK_EQ(same.gain_eps(), obs.gain_eps());
  }

  TEST_CASE("slowing scales each gain by its chain depth") {
    MaglevEnv env;
    HighGainObserver obs(env, 0.02);
    HighGainObserver slow = obs.detuned(2.0);
    CHECK_EQ(slow.gain_eps(), doctest::Approx(0.04));
    CHECK_EQ(slow.gain()(0, 0), doctest::Approx(obs.gain()(0, 0) / 2.0));
    CHECK_EQ(slow.gain()(1, 0), doctest::Approx(obs.gain()(1, 0) / 4.0));
    CHECK_EQ(slow.gain()(2, 1), doctest::Approx(obs.gain()(2, 1) / 2.0));
    CHECK_THROWS(obs.detuned(0.5));  // speeding up is not supported
  }

  TEST_CASE("construction rejects gains whose error dynamics diverge") {
    MaglevEnv maglev;
    PendulumEnv pend;
    HighGainObserver mag_obs(maglev, 0.02);
    HighGainObserver pend_obs(pend, 0.05);
    CHECK_LT(mag_obs.linearized_error_radius(), 1.0);
    CHECK_LT(pend_obs.linearized_error_radius(), 1.0);
    // The suspension tolerates the 2.5x slowdown used for its innovations
    // filter; the pendulum loses contraction well before that.
    CHECK_NOTHROW(mag_obs.detuned(2.5));
    CHECK_NOTHROW(pend_obs.detuned(1.5));
    CHECK_THROWS_AS(pend_obs.detuned(2.5), AuditError);
    // Slowing down moves the error poles toward the unit circle.
    CHECK_GT(mag_obs.detuned(2.5).linearized_error_radius(),
             mag_obs.linearized_error_radius());
  }
}

TEST_SUITE("observer: error decay") {
  TEST_CASE("open-loop pendulum estimate converges from the task prior") {
    // The unforced pendulum settles toward hanging; the observer starts from
    // the environment's prior and must lock on long before the plant settles.
    PendulumEnv env;
    HighGainObserver obs(env, 0.05);
    Vec x(4);
    x << 0.4, 2.0, 0.0, 0.0;
    Vec xhat = env.estimate_init();
    Vec u = Vec::Zero(1), y(2), xn(4), xhn(4);
    double err_at_100 = -1.0;
    for (int t = 0; t < 100; ++t) {
      env.measure(x, y);
      obs.predict(xhat, u, y, xhn);
      env.step_nominal(x, u, xn);
      x = xn;
      xhat = xhn;
    }
    err_at_100 = (xhat - x).cwiseAbs().maxCoeff();
    CHECK_LT(err_at_100, 1e-6);
    for (int t = 0; t < 100; ++t) {
      env.measure(x, y);
      obs.predict(xhat, u, y, xhn);
      env.step_nominal(x, u, xn);
      x = xn;
      xhat = xhn;
    }
    // Continued tracking keeps improving (no limit cycle in the error).
    CHECK_LT((xhat - x).cwiseAbs().maxCoeff(), err_at_100);
  }

  TEST_CASE("suspension estimate converges along a stabilized trajectory") {
    // Drive the plant with the stock bundle's feedback from the true state so
    // the trajectory stays in the operating region, and let a free-running
    // observer chase it from the prior.
    auto bundle = make_bundle("maglev");
    const Env& env = *bundle.env;
    const HighGainObserver& obs = *bundle.observer;
    RngStream rng(derive_stream(5, {stream_id::kInitialState, 7}));
    Vec x = env.sample_initial_state(rng);
    Vec xhat = env.estimate_init();
    Vec u(1), y(env.output_dim()), xn(3), xhn(3);
    for (int t = 0; t < 100; ++t) {
      env.measure(x, y);
      bundle.feedback->control(x, u);  // true-state feedback, observer passive
      obs.predict(xhat, u, y, xhn);
      env.step_nominal(x, u, xn);
      x = xn;
      xhat = xhn;
    }
    CHECK_LT((xhat - x).cwiseAbs().maxCoeff(), 1e-7);
  }
}
