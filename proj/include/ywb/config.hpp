#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ywb/ars.hpp"
#include "ywb/common.hpp"
#include "ywb/environment.hpp"
#include "ywb/feedback.hpp"
#include "ywb/observer.hpp"
#include "ywb/qmodel.hpp"
#include "ywb/system.hpp"

namespace ywb {

// ============================================================================
// Experiment configuration: one JSON file fully determines a campaign.  The
// FNV-1a hash of the canonical serialization is embedded in every artifact so
// logs, checkpoints, and reports can be traced back to their exact settings.
// ============================================================================

struct ModelConfig {
  Index q_state_dim = 32;   // contracting-cell state size
  Index q_hidden_dim = 64;  // contracting-cell hidden layer width
  Index lstm_units = 28;    // baseline recurrent cell units
};

struct ExperimentConfig {
  std::string environment = "maglev";  // maglev | pendulum
  // base-only | youla-contracting | youla-gamma | feedback-lstm
  std::string policy_class = "youla-contracting";
  std::string label;  // report id; derived from class/γ when empty
  double alpha_bar = 0.95;
  double gamma = std::numeric_limits<double>::infinity();
  ModelConfig model;
  ArsConfig ars;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6};
  std::uint64_t eval_seed = 2024;
  std::string out_dir = "runs/experiment";

  void validate() const;  // throws ConfigError naming the offending field
  std::string policy_id() const;
  std::string canonical_json() const;  // sorted keys, stable formatting
  std::uint64_t hash() const;          // FNV-1a over canonical_json()
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& cfg, const std::string& path);

std::uint64_t fnv1a_hash(const std::string& bytes);

// ============================================================================
// Checkpoints: a flat parameter vector plus identifying metadata.  The
// parameters are stored raw (little-endian doubles behind a magic/version
// header); the metadata travels in a sidecar JSON next to the binary.
// ============================================================================

struct Checkpoint {
  std::string environment;
  std::string policy_class;
  std::string label;
  ModelConfig model;
  double alpha_bar = 0.95;
  double gamma = std::numeric_limits<double>::infinity();
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  int best_epoch = 0;
  double best_test_cost = 0.0;
  double base_cost = 1.0;
  Vec params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// ============================================================================
// Controller bundle: the environment and base-controller pieces with shared
// ownership, so policies (which hold non-owning references) can be built and
// cloned freely while the bundle is alive.
// ============================================================================

struct ControllerBundle {
  std::shared_ptr<Env> env;
  std::shared_ptr<HighGainObserver> observer;
  // Separate observer feeding the innovations channel (slowed for the
  // magnetic suspension, same-gain but unseeded for the pendulum); null
  // means the control observer is reused.
  std::shared_ptr<HighGainObserver> innovations_observer;
  std::shared_ptr<StateFeedback> feedback;

  std::unique_ptr<Policy> base_policy() const;
  Index param_count(const ExperimentConfig& cfg) const;
  Vec init_params(const ExperimentConfig& cfg, std::uint64_t seed) const;
  std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg, const Vec& params) const;
};

ControllerBundle make_bundle(const std::string& environment);

// Builds the trainable objective for a configuration (bundle must outlive the
// returned task).
TrainTask make_experiment_task(const ControllerBundle& bundle, const ExperimentConfig& cfg);

}  // namespace ywb
