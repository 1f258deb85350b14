#pragma once

#include <vector>

#include "ywb/common.hpp"
#include "ywb/environment.hpp"

namespace ywb {

// ============================================================================
// High-gain observer.
//
// The predictor copies the plant dynamics exactly and corrects with the
// measurement innovation:
//
//   x̂_{t+1} = f_d(x̂_t, ū_t) + dt · H · e_t,   e_t = y_t ⊖ c(x̂_t)
//
// where f_d is the plant's own discrete step and ⊖ is the environment's
// output-error convention.  H places, per measured chain, gains a_j / eps^j
// on the j-th state down the chain, so smaller eps forces faster error decay.
// Because the correction vanishes whenever y = c(x̂), the predictor agrees
// with the plant exactly on true states.
// ============================================================================
class HighGainObserver {
 public:
  // chain_gains[i][j] is the coefficient a_{j+1} for chain i; when empty,
  // binomial coefficients of (s + 1/eps)^len are used (repeated pole).
  HighGainObserver(const Env& env, double gain_eps,
                   std::vector<std::vector<double>> chain_gains = {});

  // One predictor step; u_total is the actual plant input (control + r).
  void predict(const Vec& xhat, const Vec& u_total, const Vec& y, Vec& out) const;

  // Predicted measurement c(x̂).
  void predicted_output(const Vec& xhat, Vec& yhat) const;

  const Env& env() const { return *env_; }
  double gain_eps() const { return eps_; }
  // Correction gain matrix H (state_dim x output_dim), before the dt factor.
  const Mat& gain() const { return H_; }
  // Spectral radius of the linearized estimation-error dynamics at the
  // operating point; construction rejects gains with radius >= 1.
  double linearized_error_radius() const { return error_radius_; }

  // Same structure with eps scaled by slow_factor >= 1 (slower correction);
  // slow_factor = 1 reproduces this observer exactly.
  HighGainObserver detuned(double slow_factor) const;

 private:
  const Env* env_;
  double eps_;
  std::vector<std::vector<double>> chain_gains_;
  Mat H_;
  double error_radius_ = 0.0;
};

}  // namespace ywb
