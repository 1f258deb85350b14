#pragma once

#include <memory>

#include "ywb/common.hpp"

namespace ywb {

// A causal recurrent map: internal state advances with each input, producing
// one output per step.  Instances are stateful per rollout; construction and
// cloning are pure.  State get/set enables audits that restart the model
// from chosen internal states.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;
  virtual Index state_dim() const = 0;

  virtual void reset() = 0;  // state := canonical initial state (zeros)
  virtual void get_state(Vec& s) const = 0;
  virtual void set_state(const Vec& s) = 0;

  // Consumes in_t, emits out_t, advances the internal state.
  virtual void step(const Vec& in, Vec& out) = 0;

  virtual std::unique_ptr<SequenceModel> clone() const = 0;
};

}  // namespace ywb
