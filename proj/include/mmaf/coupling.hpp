#pragma once

#include <vector>

#include "mmaf/occupation.hpp"

namespace mmaf::coupling {

enum class Side { plus, minus };

// Gap event around the block starting at l, width j (plus side):
// drivers l..l+j stay at or below l+j+1/2 on the grid over [0, t] while
// driver l+j+1 stays strictly above. The minus side mirrors this below l.
// With bridge = true, between-step barrier crossings are added by
// Brownian-bridge Bernoulli draws keyed to the ensemble's seeds.
bool gap_event(const rng::DrivingEnsemble& ensemble, int l, int j, double t,
               Side side, bool bridge = false);

// Union of gap events with widths j = 1..N.
bool gap_union(const rng::DrivingEnsemble& ensemble, int l, int N, double t,
               Side side, bool bridge = false);

// Same event evaluated from the stream directly, without storing paths.
// Identical result to gap_event on an ensemble with the same seeds and grid,
// evaluated at t = horizon.
bool gap_event_streamed(uint64_t master_seed, uint32_t replication_id,
                        const rng::TimeGrid& grid, int l, int j, Side side,
                        bool bridge = false);

// Exact continuous-time probability of the width-j gap event (independent of
// l): the running extremum of each driver is below/above its barrier, by the
// reflection principle P(max_{[0,t]} W <= a) = 2 Phi(a/sqrt(t)) - 1.
double exact_gap_prob(int j, double t);

// Pathwise agreement of a centered map with a one-sided map built from the
// same drivers: positions of particles k > l+j (plus; k < l-j minus) compared
// bitwise at every grid index. Restricted regime: l >= 0 for plus, l <= 0 for
// minus, so that both maps resolve the same representatives above the gap.
bool verify_coupling(const flow::FlowRealization& full,
                     const flow::FlowRealization& half, int l, int j, int p,
                     Side side);

// Stationary covariance estimates per lag with standard errors across
// replications. All samples must share window, time, offset and function.
struct DecaySeries {
  int k_max = 0;
  int reps = 0;
  std::vector<double> cov;  // lag 1..k_max
  std::vector<double> se;
};

DecaySeries covariance_decay(const std::vector<occupation::OccupationSample>& samples,
                             int k_max);

}  // namespace mmaf::coupling
