#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace mmaf::rng {

// Philox4x32-10 block cipher. Counter-based: every draw is a pure function of
// (counter, key), so streams can be evaluated in any order, on any worker, and
// always produce the same values.
std::array<uint32_t, 4> philox4x32(const std::array<uint32_t, 4>& counter,
                                   const std::array<uint32_t, 2>& key);

// Substream tags keep the different consumers of randomness disjoint.
enum class StreamTag : uint32_t {
  increment = 0,     // driver path increments
  flow_bridge = 1,   // between-step merge draws in the flow (bridge mode)
  event_bridge = 2,  // between-step barrier-crossing draws in gap events
  bootstrap = 3,     // KS null-table bootstrap draws
  synthetic = 4,     // synthetic samples used by statistical self-tests
};

// One standard normal per (seed, rep, k, i, tag). Draws come in Box-Muller
// pairs sharing one Philox block: block index = i >> 1. normal_draw(i) always
// equals element i - i0 of normal_block(i0 <= i), bit for bit.
double normal_draw(uint64_t master_seed, uint32_t replication_id, int32_t k,
                   uint32_t i, StreamTag tag);
void normal_block(uint64_t master_seed, uint32_t replication_id, int32_t k,
                  StreamTag tag, uint32_t i0, uint32_t count, double* out);

// One uniform in [0, 1) per (seed, rep, k, i, tag).
double uniform_draw(uint64_t master_seed, uint32_t replication_id, int32_t k,
                    uint32_t i, StreamTag tag);

// Uniform partition of [0, horizon] into `steps` equal steps.
struct TimeGrid {
  double horizon = 0.0;
  int steps = 0;
  double dt = 0.0;

  // t_0 = 0, ..., t_steps = horizon exactly.
  double time(int i) const { return i == steps ? horizon : dt * i; }
  // Grid-point lookup with a tiny relative tolerance; no interpolation.
  std::optional<int> index_of(double t) const;
  bool operator==(const TimeGrid&) const = default;
};

TimeGrid make_grid(double horizon, int steps);

struct SeedRecord {
  uint64_t master_seed = 0;
  uint32_t replication_id = 0;
};

// Independent driving Brownian paths w_k, k in [index_lo, index_hi], sampled
// on a common grid with w_k(0) = k.
struct DrivingEnsemble {
  int index_lo = 0;
  int index_hi = -1;
  TimeGrid grid;
  SeedRecord seeds;
  std::vector<std::vector<double>> paths;  // [k - index_lo][0..steps]

  const std::vector<double>& path(int k) const { return paths[k - index_lo]; }
  double value(int k, int i) const { return paths[k - index_lo][i]; }
  bool contains(int k) const { return k >= index_lo && k <= index_hi; }
};

DrivingEnsemble sample_driving(int index_lo, int index_hi, const TimeGrid& grid,
                               uint64_t master_seed, uint32_t replication_id);

// Probability that a Brownian bridge with variance rate sigma2 crosses a
// barrier between two observations at distances d0, d1 > 0 on the same side:
// exp(-2 d0 d1 / (sigma2 dt)).
double bridge_crossing_prob(double d0, double d1, double sigma2, double dt);

}  // namespace mmaf::rng
