#pragma once

#include <cstdint>
#include <initializer_list>

#include "ywb/common.hpp"

namespace ywb {

// ============================================================================
// Deterministic counter-based random streams.
//
// Every consumer of randomness (rollout noise, initial conditions, search
// directions, attack probes, ...) derives its own stream key from
// (root seed, purpose id, indices).  Streams are stateless to create and
// independent of thread scheduling, so results are bit-reproducible for a
// given (config, seed) regardless of worker count.
// ============================================================================

// SplitMix64 output function; also used as the key-mixing primitive.
std::uint64_t mix64(std::uint64_t z);

// Derives a stream key from a root seed and a list of sub-identifiers.
std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids);

// Stable ids for the major randomness consumers.  Kept in one place so that
// independent re-implementations of a consumer can reproduce its stream.
namespace stream_id {
inline constexpr std::uint64_t kRolloutNoise = 1;
inline constexpr std::uint64_t kInitialState = 2;
inline constexpr std::uint64_t kSearchDirections = 3;
inline constexpr std::uint64_t kEvalSuite = 4;
inline constexpr std::uint64_t kModelInit = 5;
inline constexpr std::uint64_t kAttack = 6;
inline constexpr std::uint64_t kAudit = 7;
inline constexpr std::uint64_t kTrainSuite = 8;
}  // namespace stream_id

class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(key) {}

  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids)
      : RngStream(derive_stream(seed, ids)) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double next_double();

  // Uniform on [lo, hi).
  double next_uniform(double lo, double hi);

  // Standard normal via Box-Muller (pairs cached for determinism).
  double next_gaussian();

  // Fills v with independent standard normal draws.
  void fill_gaussian(Vec& v);

  // Fills v with elementwise std * N(0,1); std may be any vector of the same
  // size (zero entries yield exactly zero noise but still consume a draw, so
  // draw counts are schedule-independent).
  void fill_scaled_gaussian(const Vec& std_dev, Vec& v);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ywb
