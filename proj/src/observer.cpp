#include "ywb/observer.hpp"

#include <cmath>
#include <sstream>

#include "ywb/linalg.hpp"

namespace ywb {

namespace {

// Binomial coefficients C(len, 1..len): places all error poles together.
std::vector<double> binomial_gains(std::size_t len) {
  std::vector<double> a(len);
  double c = 1.0;
  for (std::size_t j = 0; j < len; ++j) {
    c = c * static_cast<double>(len - j) / static_cast<double>(j + 1);
    a[j] = c;
  }
  return a;
}

}  // namespace

HighGainObserver::HighGainObserver(const Env& env, double gain_eps,
                                   std::vector<std::vector<double>> chain_gains)
    : env_(&env), eps_(gain_eps), chain_gains_(std::move(chain_gains)) {
  require(eps_ > 0.0, "observer: gain_eps must be positive");
  const auto& chains = env.observer_structure().chains;
  if (chain_gains_.empty()) {
    for (const auto& chain : chains) chain_gains_.push_back(binomial_gains(chain.state_indices.size()));
  }
  require(chain_gains_.size() == chains.size(), "observer: one gain list per chain required");

  H_ = Mat::Zero(env.state_dim(), env.output_dim());
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const auto& chain = chains[i];
    require(chain_gains_[i].size() == chain.state_indices.size(),
            "observer: gain count must match chain length");
    double scale = 1.0;
    for (std::size_t j = 0; j < chain.state_indices.size(); ++j) {
      scale /= eps_;
      H_(chain.state_indices[j], chain.output_index) = chain_gains_[i][j] * scale;
    }
  }

  // Reject gains whose linearized estimation-error dynamics diverge at the
  // operating point: error evolves with A_d - dt H C.
  Mat A_d, B_d, C, D;
  linearize([&env](const Vec& x, const Vec& u, Vec& out) { env.step_nominal(x, u, out); },
            env.x_eq(), env.u_eq(), A_d, B_d);
  linearize([&env](const Vec& x, const Vec&, Vec& out) { env.measure(x, out); }, env.x_eq(),
            Vec::Zero(1), C, D, 1e-6, env.output_dim());
  error_radius_ = spectral_radius(A_d - env.dt() * H_ * C);
  if (error_radius_ >= 1.0) {
    std::ostringstream msg;
    msg << "observer: linearized error dynamics diverge (spectral radius " << error_radius_
        << " >= 1) for eps = " << eps_ << " on " << env.name();
    throw AuditError(msg.str());
  }
}

void HighGainObserver::predict(const Vec& xhat, const Vec& u_total, const Vec& y, Vec& out) const {
  thread_local Vec yhat, err;
  yhat.resize(env_->output_dim());
  err.resize(env_->output_dim());
  env_->measure(xhat, yhat);
  env_->output_error(y, yhat, err);
  env_->step_nominal(xhat, u_total, out);
  out.noalias() += env_->dt() * (H_ * err);
}

void HighGainObserver::predicted_output(const Vec& xhat, Vec& yhat) const {
  env_->measure(xhat, yhat);
}

HighGainObserver HighGainObserver::detuned(double slow_factor) const {
  require(slow_factor >= 1.0, "observer: slow_factor must be >= 1");
  return HighGainObserver(*env_, eps_ * slow_factor, chain_gains_);
}

}  // namespace ywb
