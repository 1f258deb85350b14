#pragma once

// Shared test fixtures: linear plants with closed-form solutions, static
// policies, a synthetic attack-threshold environment with an analytically
// known critical budget, and an independent stacked-state closed-loop oracle
// that re-derives the controller interconnection in one monolithic loop.

#include <cstdint>
#include <functional>
#include <vector>

#include "ywb/common.hpp"
#include "ywb/environment.hpp"
#include "ywb/feedback.hpp"
#include "ywb/observer.hpp"
#include "ywb/sequence_model.hpp"
#include "ywb/system.hpp"
#include "ywb/verify.hpp"

namespace ywb::testfx {

// ----------------------------------------------------------------------------
// Linear plant x+ = A x + B u, out = C x with closed-form trajectories.
// ----------------------------------------------------------------------------
struct LinearFixture {
  Mat A, B, C;
  double spectral_radius = 0.0;
  bool stable = false;

  // x_t = A^t x0 + sum_{k<t} A^{t-1-k} B u_k, evaluated by repeated squaring
  // of nothing fancier than the recursion itself run in exact order.
  Vec state_at(const Vec& x0, const std::vector<Vec>& inputs, int t) const;
  // Fixed point under constant input (stable fixtures): (I - A)^{-1} B u.
  Vec fixed_point(const Vec& u) const;
  AuditSystem audit() const;
};

LinearFixture make_linear_fixture(const Mat& A, const Mat& B, const Mat& C);
LinearFixture make_scalar_fixture(double a, double b = 1.0, double c = 1.0);

// ----------------------------------------------------------------------------
// Memoryless linear policy u = K y + bias.  K = I echoes the measurement.
// ----------------------------------------------------------------------------
class StaticLinearPolicy final : public Policy {
 public:
  StaticLinearPolicy(const Mat& K, const Vec& bias);
  explicit StaticLinearPolicy(const Mat& K);

  void reset() override {}
  void step(const Vec& y, const Vec& r, Vec& u_out) override;
  std::unique_ptr<Policy> clone() const override;
  Index output_dim() const override { return K_.rows(); }
  Index internal_dim() const override { return 0; }
  void get_internal(Vec& s) const override { s.resize(0); }
  void set_internal(const Vec&) override {}

 private:
  Mat K_;
  Vec bias_;
};

// ----------------------------------------------------------------------------
// Synthetic attack-threshold environment.  One RK4 step of dx/dt = -x + u at
// dt = 1 gives the exact affine map x+ = kPhi x + kPsi u with kPhi = 9/24 and
// kPsi = 15/24.  Closing the loop with u = -kDeadbeatGain y cancels the state
// term, so a measurement offset a_t yields x_{t+1} = -kPhi a_t exactly and the
// tail-mean |x| deviation of a saturated attack equals kPhi * epsilon.  With
// the threshold below, the criterion flips at epsilon = kCriticalEpsilon.
// Noise-free and started from x0 = 0, so the crossing is deterministic.
// ----------------------------------------------------------------------------
class ThresholdEnv final : public Env {
 public:
  static constexpr double kPhi = 9.0 / 24.0;
  static constexpr double kPsi = 15.0 / 24.0;
  static constexpr double kDeadbeatGain = kPhi / kPsi;  // 0.6
  static constexpr double kThreshold = 0.15;
  static constexpr double kCriticalEpsilon = kThreshold / kPhi;  // 0.4

  ThresholdEnv();

  void rhs(const Vec& x, const Vec& u, Vec& dx) const override;
  void measure(const Vec& x, Vec& y) const override;
  double tracking_deviation(const Trajectory& traj, double tail_fraction) const override;
  double attack_threshold() const override { return kThreshold; }
};

// ----------------------------------------------------------------------------
// Independent closed-loop oracle: simulates plant, observer(s), feedback, and
// the optional correction model as one stacked recursion, re-deriving the
// interconnection (measurement -> innovation -> correction -> control ->
// plant/observer advance) instead of delegating to the policy classes.  The
// noise draws replay the rollout convention: measurement vector first, then
// process vector, each step.  Primitive maps (integrator step, measurement,
// feedback law, cell step) are evaluated through their public interfaces.
// ----------------------------------------------------------------------------
Trajectory stacked_oracle_rollout(const Env& env, const HighGainObserver& observer,
                                  const HighGainObserver* innovations_observer,
                                  const StateFeedback& feedback, SequenceModel* q_model,
                                  const Vec& x0, std::uint64_t noise_key,
                                  const std::function<void(int, Vec&)>& reference = nullptr);

// Observer-error norms |x̂_t - x_t| from the same monolithic recursion with
// the correction model active; used to check the error decouples from Q.
std::vector<double> oracle_observer_error(const Env& env, const HighGainObserver& observer,
                                          const StateFeedback& feedback, SequenceModel* q_model,
                                          const Vec& x0, std::uint64_t noise_key);

}  // namespace ywb::testfx
