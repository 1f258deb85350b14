#pragma once

#include <memory>

#include "ywb/common.hpp"
#include "ywb/environment.hpp"
#include "ywb/feedback.hpp"
#include "ywb/observer.hpp"
#include "ywb/sequence_model.hpp"
#include "ywb/system.hpp"

namespace ywb {

// ============================================================================
// Output-feedback controllers built from observer + state feedback, plus the
// augmentations: a Youla correction driven by (r, innovations) and a direct
// measurement-feedback correction.  All carry their state estimate(s) as
// internal state, one instance per rollout.
// ============================================================================

class BaseControllerPolicy : public Policy {
 public:
  BaseControllerPolicy(const Env& env, const HighGainObserver& observer,
                       const StateFeedback& feedback);
  BaseControllerPolicy(const BaseControllerPolicy& other);

  void reset() override;
  void step(const Vec& y, const Vec& r, Vec& u_out) override;
  std::unique_ptr<Policy> clone() const override;
  Index output_dim() const override { return env_->input_dim(); }

  Index internal_dim() const override { return env_->state_dim(); }
  void get_internal(Vec& s) const override { s = xhat_; }
  void set_internal(const Vec& s) override;
  Index embedded_internal_dim() const override { return env_->embed_dim(); }
  void embed_internal(Vec& e) const override;
  void internal_perturbation_scale(Vec& s) const override;

  const Vec& estimate() const { return xhat_; }
  // Pins x̂0 exactly and disables first-measurement seeding.
  void set_initial_estimate(const Vec& x0hat);

 protected:
  const Env* env_;
  const HighGainObserver* observer_;
  std::unique_ptr<StateFeedback> feedback_;
  Vec xhat_, xhat_init_;
  Vec u_bar_, u_total_, xhat_next_;
  bool estimate_seeded_ = false;
  bool seed_from_measurement_ = true;

  // On the first step after reset, pulls the measured components of the
  // estimate from y; a state set via set_internal is left untouched.
  void seed_if_needed(const Vec& y);
  void advance_estimate(const Vec& y);  // consumes u_total_
};

// Youla-augmented controller: u_t = k(x̂_t) + Q(r_t, ỹ_t) with innovations
// ỹ_t = y_t ⊖ c(x̂'_t) taken from a dedicated innovations observer when one
// is supplied (x̂'_t), else from the control observer's estimate.  With the
// zero Q-model this reduces bit-exactly to the base controller.
class YoulaPolicy final : public BaseControllerPolicy {
 public:
  YoulaPolicy(const Env& env, const HighGainObserver& observer, const StateFeedback& feedback,
              std::unique_ptr<SequenceModel> q_model,
              const HighGainObserver* innovations_observer = nullptr);
  YoulaPolicy(const YoulaPolicy& other);

  void reset() override;
  void step(const Vec& y, const Vec& r, Vec& u_out) override;
  std::unique_ptr<Policy> clone() const override;

  Index internal_dim() const override;
  void get_internal(Vec& s) const override;
  void set_internal(const Vec& s) override;
  Index embedded_internal_dim() const override;
  void embed_internal(Vec& e) const override;
  void internal_perturbation_scale(Vec& s) const override;

  const SequenceModel& q_model() const { return *q_; }
  bool has_innovations_observer() const { return innovations_observer_ != nullptr; }
  const Vec& innovations_estimate() const;

 private:
  std::unique_ptr<SequenceModel> q_;
  const HighGainObserver* innovations_observer_;  // nullptr = use control observer
  Vec xhat_inno_, xhat_inno_next_;
  Vec q_in_, u_tilde_, y_hat_, y_tilde_;
};

// Direct measurement-feedback augmentation: u_t = k(x̂_t) + F(y_t history);
// the net consumes the raw measurement, no innovations path.
class NetFeedbackPolicy final : public BaseControllerPolicy {
 public:
  NetFeedbackPolicy(const Env& env, const HighGainObserver& observer,
                    const StateFeedback& feedback, std::unique_ptr<SequenceModel> net);
  NetFeedbackPolicy(const NetFeedbackPolicy& other);

  void reset() override;
  void step(const Vec& y, const Vec& r, Vec& u_out) override;
  std::unique_ptr<Policy> clone() const override;

  Index internal_dim() const override;
  void get_internal(Vec& s) const override;
  void set_internal(const Vec& s) override;
  Index embedded_internal_dim() const override;
  void embed_internal(Vec& e) const override;
  void internal_perturbation_scale(Vec& s) const override;

  const SequenceModel& net() const { return *net_; }

 private:
  std::unique_ptr<SequenceModel> net_;
  Vec u_tilde_;
};

// ============================================================================
// Constructive converse: wraps an arbitrary dynamic output-feedback policy K
// as a Q-shaped system with inputs (r, ỹ) and output ũ.  Internally it
// replays the closed loop K would see: the innovation plus the internal
// observer replica's predicted output reconstruct the measurement, K produces
// its control g, and the emitted correction is ũ = g − k(x̂).  Driving the
// augmented controller with this Q reproduces K's closed loop exactly.
// ============================================================================
std::unique_ptr<SequenceModel> construct_qk(const Env& env, const HighGainObserver& observer,
                                            const StateFeedback& feedback,
                                            const Policy& controller);

}  // namespace ywb
