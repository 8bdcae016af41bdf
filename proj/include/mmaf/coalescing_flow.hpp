#pragma once

#include <vector>

#include "mmaf/rng_paths.hpp"

namespace mmaf::flow {

// Which one-sided variant of the coalescing map is applied. The variant
// decides how a merged cluster picks its representative driver:
//   full  -> member closest to the domain midpoint,
//   plus  -> leftmost member,
//   minus -> rightmost member.
enum class Variant { full, plus, minus };

struct IndexInterval {
  int lo = 0;
  int hi = -1;
  int size() const { return hi - lo + 1; }
  bool contains(int k) const { return k >= lo && k <= hi; }
  bool operator==(const IndexInterval&) const = default;
};

int representative_of(const IndexInterval& members, const IndexInterval& domain,
                      Variant variant);

// One coalescence event. left/right are the outermost participating clusters
// as they were just before merging; a simultaneous chain of touching clusters
// produces a single event carrying the union's mass.
struct MergeEvent {
  int grid_index = 0;
  IndexInterval left_members, right_members;
  int new_mass = 0;
  int new_representative = 0;
};

struct MassStep {
  int grid_index = 0;
  int mass = 1;
};

// Grid realization of the coalescing system x_k, k in domain. Positions of
// particles in one cluster are bitwise identical from the merge index on.
struct FlowRealization {
  IndexInterval domain;
  rng::TimeGrid grid;
  Variant variant = Variant::full;
  rng::SeedRecord seeds;
  std::vector<std::vector<double>> positions;     // [k - domain.lo][0..steps]
  std::vector<MergeEvent> events;                 // nondecreasing grid_index
  std::vector<std::vector<MassStep>> mass_steps;  // per particle, starts (0,1)

  const std::vector<double>& path(int k) const { return positions[k - domain.lo]; }
  double position(int k, int i) const { return positions[k - domain.lo][i]; }
};

// Runs the coalescing dynamics over the ensemble's grid: each cluster moves by
// its representative driver's increments scaled by 1/sqrt(mass); adjacent
// clusters whose positions touch or cross at a grid point merge there and
// continue from the representative part's position. With bridge = true,
// adjacent clusters that stayed apart at both endpoints of a step may also be
// merged by a Brownian-bridge crossing draw.
FlowRealization apply_flow_map(const rng::DrivingEnsemble& ensemble,
                               IndexInterval domain, Variant variant,
                               bool bridge = false);

// Mass of particle k's cluster at time t (right-continuous step function).
int mass_at(const FlowRealization& flow, int k, double t);

// Accumulated quadratic variation proxy: sum of dt / mass(t_i) over t_i < t.
double quadratic_variation(const FlowRealization& flow, int k, double t);

}  // namespace mmaf::flow
