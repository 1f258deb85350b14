#include "ywb/policy.hpp"

namespace ywb {

namespace {

// Maps one state estimate into the environment's wrap-invariant embedding,
// writing into a segment of a larger stacked vector.
void embed_into(const Env& env, const Vec& x, Vec& dst, Index offset) {
  thread_local Vec e;
  e.resize(env.embed_dim());
  env.embed(x, e);
  dst.segment(offset, env.embed_dim()) = e;
}

}  // namespace

// ----------------------------------------------------------------------------
// BaseControllerPolicy
// ----------------------------------------------------------------------------

BaseControllerPolicy::BaseControllerPolicy(const Env& env, const HighGainObserver& observer,
                                           const StateFeedback& feedback)
    : env_(&env), observer_(&observer), feedback_(feedback.clone()) {
  require(&observer.env() == &env, "policy: observer belongs to a different environment");
  xhat_init_ = env.estimate_init();
  xhat_ = xhat_init_;
  u_bar_.resize(env.input_dim());
  u_total_.resize(env.input_dim());
  xhat_next_.resize(env.state_dim());
}

BaseControllerPolicy::BaseControllerPolicy(const BaseControllerPolicy& other)
    : env_(other.env_),
      observer_(other.observer_),
      feedback_(other.feedback_->clone()),
      xhat_(other.xhat_),
      xhat_init_(other.xhat_init_),
      u_bar_(other.u_bar_),
      u_total_(other.u_total_),
      xhat_next_(other.xhat_next_),
      estimate_seeded_(other.estimate_seeded_),
      seed_from_measurement_(other.seed_from_measurement_) {}

void BaseControllerPolicy::reset() {
  xhat_ = xhat_init_;
  estimate_seeded_ = false;
  feedback_->reset();
}

void BaseControllerPolicy::seed_if_needed(const Vec& y) {
  if (estimate_seeded_) return;
  if (seed_from_measurement_) env_->seed_estimate(y, xhat_);
  estimate_seeded_ = true;
}

void BaseControllerPolicy::advance_estimate(const Vec& y) {
  observer_->predict(xhat_, u_total_, y, xhat_next_);
  xhat_.swap(xhat_next_);
}

void BaseControllerPolicy::step(const Vec& y, const Vec& r, Vec& u_out) {
  seed_if_needed(y);
  feedback_->control(xhat_, u_bar_);
  u_out = u_bar_;
  u_total_ = u_bar_ + r;  // the plant applies u + r; the observer sees the same
  advance_estimate(y);
}

std::unique_ptr<Policy> BaseControllerPolicy::clone() const {
  return std::make_unique<BaseControllerPolicy>(*this);
}

void BaseControllerPolicy::set_internal(const Vec& s) {
  require(s.size() == env_->state_dim(), "policy: internal state size mismatch");
  xhat_ = s;
  estimate_seeded_ = true;
  feedback_->reset();
}

void BaseControllerPolicy::embed_internal(Vec& e) const {
  e.resize(env_->embed_dim());
  embed_into(*env_, xhat_, e, 0);
}

void BaseControllerPolicy::internal_perturbation_scale(Vec& s) const {
  s = 0.5 * (env_->ic_hi() - env_->ic_lo());
}

void BaseControllerPolicy::set_initial_estimate(const Vec& x0hat) {
  require(x0hat.size() == env_->state_dim(), "policy: initial estimate size mismatch");
  xhat_init_ = x0hat;
  xhat_ = x0hat;
  seed_from_measurement_ = false;
}

// ----------------------------------------------------------------------------
// YoulaPolicy
// ----------------------------------------------------------------------------

YoulaPolicy::YoulaPolicy(const Env& env, const HighGainObserver& observer,
                         const StateFeedback& feedback, std::unique_ptr<SequenceModel> q_model,
                         const HighGainObserver* innovations_observer)
    : BaseControllerPolicy(env, observer, feedback),
      q_(std::move(q_model)),
      innovations_observer_(innovations_observer) {
  require(q_ != nullptr, "youla policy: q-model required");
  require(q_->input_dim() == env.input_dim() + env.output_dim(),
          "youla policy: q-model must consume (r, innovations)");
  require(q_->output_dim() == env.input_dim(), "youla policy: q-model output dimension mismatch");
  if (innovations_observer_)
    require(&innovations_observer_->env() == &env,
            "youla policy: innovations observer belongs to a different environment");
  xhat_inno_ = xhat_init_;
  xhat_inno_next_.resize(env.state_dim());
  q_in_.resize(q_->input_dim());
  u_tilde_.resize(env.input_dim());
  y_hat_.resize(env.output_dim());
  y_tilde_.resize(env.output_dim());
}

YoulaPolicy::YoulaPolicy(const YoulaPolicy& other)
    : BaseControllerPolicy(other),
      q_(other.q_->clone()),
      innovations_observer_(other.innovations_observer_),
      xhat_inno_(other.xhat_inno_),
      xhat_inno_next_(other.xhat_inno_next_),
      q_in_(other.q_in_),
      u_tilde_(other.u_tilde_),
      y_hat_(other.y_hat_),
      y_tilde_(other.y_tilde_) {}

void YoulaPolicy::reset() {
  BaseControllerPolicy::reset();
  q_->reset();
  xhat_inno_ = xhat_init_;
}

const Vec& YoulaPolicy::innovations_estimate() const {
  return innovations_observer_ ? xhat_inno_ : xhat_;
}

void YoulaPolicy::step(const Vec& y, const Vec& r, Vec& u_out) {
  // Innovation from the dedicated observer when present.  On the first step
  // the innovation is taken against the pre-seed estimate so that it still
  // carries the full measurement (the converse construction reconstructs y
  // from it); the estimate is seeded afterwards, before the feedback law.
  // A dedicated innovations filter is never measurement-seeded: it starts
  // from the task prior, so its transient keeps the initial-condition
  // information visible to the learned model for several steps.
  const Vec& xi = innovations_observer_ ? xhat_inno_ : xhat_;
  const HighGainObserver& inno_obs = innovations_observer_ ? *innovations_observer_ : *observer_;
  inno_obs.predicted_output(xi, y_hat_);
  env_->output_error(y, y_hat_, y_tilde_);

  q_in_.head(env_->input_dim()) = r;
  q_in_.tail(env_->output_dim()) = y_tilde_;
  q_->step(q_in_, u_tilde_);

  if (!estimate_seeded_) seed_if_needed(y);
  feedback_->control(xhat_, u_bar_);
  u_out = u_bar_ + u_tilde_;

  u_total_ = u_out + r;
  advance_estimate(y);
  if (innovations_observer_) {
    innovations_observer_->predict(xhat_inno_, u_total_, y, xhat_inno_next_);
    xhat_inno_.swap(xhat_inno_next_);
  }
}

std::unique_ptr<Policy> YoulaPolicy::clone() const { return std::make_unique<YoulaPolicy>(*this); }

Index YoulaPolicy::internal_dim() const {
  const Index n = env_->state_dim();
  return n + (innovations_observer_ ? n : 0) + q_->state_dim();
}

void YoulaPolicy::get_internal(Vec& s) const {
  const Index n = env_->state_dim();
  s.resize(internal_dim());
  s.head(n) = xhat_;
  Index off = n;
  if (innovations_observer_) {
    s.segment(off, n) = xhat_inno_;
    off += n;
  }
  thread_local Vec qs;
  q_->get_state(qs);
  s.tail(q_->state_dim()) = qs;
}

void YoulaPolicy::set_internal(const Vec& s) {
  const Index n = env_->state_dim();
  require(s.size() == internal_dim(), "youla policy: internal state size mismatch");
  xhat_ = s.head(n);
  estimate_seeded_ = true;
  Index off = n;
  if (innovations_observer_) {
    xhat_inno_ = s.segment(off, n);
    off += n;
  }
  q_->set_state(s.tail(q_->state_dim()));
  feedback_->reset();
}

Index YoulaPolicy::embedded_internal_dim() const {
  const Index ne = env_->embed_dim();
  return ne + (innovations_observer_ ? ne : 0) + q_->state_dim();
}

void YoulaPolicy::internal_perturbation_scale(Vec& s) const {
  const Index n = env_->state_dim();
  const Vec est = 0.5 * (env_->ic_hi() - env_->ic_lo());
  s.resize(internal_dim());
  s.head(n) = est;
  Index off = n;
  if (innovations_observer_) {
    s.segment(off, n) = est;
    off += n;
  }
  s.tail(q_->state_dim()).setOnes();
}

void YoulaPolicy::embed_internal(Vec& e) const {
  const Index ne = env_->embed_dim();
  e.resize(embedded_internal_dim());
  embed_into(*env_, xhat_, e, 0);
  Index off = ne;
  if (innovations_observer_) {
    embed_into(*env_, xhat_inno_, e, off);
    off += ne;
  }
  thread_local Vec qs;
  q_->get_state(qs);
  e.tail(q_->state_dim()) = qs;
}

// ----------------------------------------------------------------------------
// NetFeedbackPolicy
// ----------------------------------------------------------------------------

NetFeedbackPolicy::NetFeedbackPolicy(const Env& env, const HighGainObserver& observer,
                                     const StateFeedback& feedback,
                                     std::unique_ptr<SequenceModel> net)
    : BaseControllerPolicy(env, observer, feedback), net_(std::move(net)) {
  require(net_ != nullptr, "feedback-net policy: net required");
  require(net_->input_dim() == env.output_dim(),
          "feedback-net policy: net must consume the measurement");
  require(net_->output_dim() == env.input_dim(),
          "feedback-net policy: net output dimension mismatch");
  u_tilde_.resize(env.input_dim());
}

NetFeedbackPolicy::NetFeedbackPolicy(const NetFeedbackPolicy& other)
    : BaseControllerPolicy(other), net_(other.net_->clone()), u_tilde_(other.u_tilde_) {}

void NetFeedbackPolicy::reset() {
  BaseControllerPolicy::reset();
  net_->reset();
}

void NetFeedbackPolicy::step(const Vec& y, const Vec& r, Vec& u_out) {
  seed_if_needed(y);
  net_->step(y, u_tilde_);
  feedback_->control(xhat_, u_bar_);
  u_out = u_bar_ + u_tilde_;
  u_total_ = u_out + r;
  advance_estimate(y);
}

std::unique_ptr<Policy> NetFeedbackPolicy::clone() const {
  return std::make_unique<NetFeedbackPolicy>(*this);
}

Index NetFeedbackPolicy::internal_dim() const {
  return env_->state_dim() + net_->state_dim();
}

void NetFeedbackPolicy::get_internal(Vec& s) const {
  s.resize(internal_dim());
  s.head(env_->state_dim()) = xhat_;
  thread_local Vec ns;
  net_->get_state(ns);
  s.tail(net_->state_dim()) = ns;
}

void NetFeedbackPolicy::set_internal(const Vec& s) {
  require(s.size() == internal_dim(), "feedback-net policy: internal state size mismatch");
  xhat_ = s.head(env_->state_dim());
  estimate_seeded_ = true;
  net_->set_state(s.tail(net_->state_dim()));
  feedback_->reset();
}

Index NetFeedbackPolicy::embedded_internal_dim() const {
  return env_->embed_dim() + net_->state_dim();
}

void NetFeedbackPolicy::embed_internal(Vec& e) const {
  e.resize(embedded_internal_dim());
  embed_into(*env_, xhat_, e, 0);
  thread_local Vec ns;
  net_->get_state(ns);
  e.tail(net_->state_dim()) = ns;
}

void NetFeedbackPolicy::internal_perturbation_scale(Vec& s) const {
  s.resize(internal_dim());
  s.head(env_->state_dim()) = 0.5 * (env_->ic_hi() - env_->ic_lo());
  s.tail(net_->state_dim()).setOnes();
}

// ----------------------------------------------------------------------------
// Constructive converse Q_K
// ----------------------------------------------------------------------------

namespace {

class QkModel final : public SequenceModel {
 public:
  QkModel(const Env& env, const HighGainObserver& obs, const StateFeedback& fb, const Policy& K)
      : env_(&env), obs_(&obs), fb_(fb.clone()), k_(K.clone()) {
    require(K.output_dim() == env.input_dim(), "construct_qk: controller output dimension mismatch");
    k_->reset();
    fb_->reset();
    xhat_ = env.estimate_init();
    xhat_next_.resize(env.state_dim());
    y_rec_.resize(env.output_dim());
    g_.resize(env.input_dim());
    kx_.resize(env.input_dim());
    u_total_.resize(env.input_dim());
  }

  QkModel(const QkModel& other)
      : env_(other.env_),
        obs_(other.obs_),
        fb_(other.fb_->clone()),
        k_(other.k_->clone()),
        xhat_(other.xhat_),
        xhat_next_(other.xhat_next_),
        y_rec_(other.y_rec_),
        g_(other.g_),
        kx_(other.kx_),
        u_total_(other.u_total_),
        seeded_(other.seeded_) {}

  Index input_dim() const override { return env_->input_dim() + env_->output_dim(); }
  Index output_dim() const override { return env_->input_dim(); }
  Index state_dim() const override { return env_->state_dim() + k_->internal_dim(); }

  void reset() override {
    xhat_ = env_->estimate_init();
    seeded_ = false;
    k_->reset();
    fb_->reset();
  }

  void get_state(Vec& s) const override {
    s.resize(state_dim());
    s.head(env_->state_dim()) = xhat_;
    thread_local Vec ks;
    k_->get_internal(ks);
    s.tail(k_->internal_dim()) = ks;
  }

  void set_state(const Vec& s) override {
    require(s.size() == state_dim(), "construct_qk: state size mismatch");
    xhat_ = s.head(env_->state_dim());
    seeded_ = true;
    k_->set_internal(s.tail(k_->internal_dim()));
    fb_->reset();
  }

  void step(const Vec& in, Vec& out) override {
    const Index m = env_->input_dim(), p = env_->output_dim();
    const auto r = in.head(m);
    const auto y_tilde = in.tail(p);
    // Reconstruct the measurement K would have seen; on the first step the
    // innovation was formed against the pre-seed estimate, so the replica
    // recovers the measurement exactly, then seeds the same way the live
    // controller does.
    obs_->predicted_output(xhat_, y_rec_);
    y_rec_ += y_tilde;
    if (!seeded_) {
      env_->seed_estimate(y_rec_, xhat_);
      seeded_ = true;
    }
    // K's control, then subtract the base law at the internal estimate.
    k_->step(y_rec_, r, g_);
    fb_->control(xhat_, kx_);
    out = g_ - kx_;
    // Advance the internal observer replica with the realized plant input.
    u_total_ = g_ + r;
    obs_->predict(xhat_, u_total_, y_rec_, xhat_next_);
    xhat_.swap(xhat_next_);
  }

  std::unique_ptr<SequenceModel> clone() const override {
    return std::make_unique<QkModel>(*this);
  }

 private:
  const Env* env_;
  const HighGainObserver* obs_;
  std::unique_ptr<StateFeedback> fb_;
  std::unique_ptr<Policy> k_;
  Vec xhat_, xhat_next_, y_rec_, g_, kx_, u_total_;
  bool seeded_ = false;
};

}  // namespace

std::unique_ptr<SequenceModel> construct_qk(const Env& env, const HighGainObserver& observer,
                                            const StateFeedback& feedback,
                                            const Policy& controller) {
  require(&observer.env() == &env, "construct_qk: observer belongs to a different environment");
  return std::make_unique<QkModel>(env, observer, feedback, controller);
}

}  // namespace ywb
