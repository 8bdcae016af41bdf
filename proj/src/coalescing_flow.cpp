#include "mmaf/coalescing_flow.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mmaf::flow {

namespace {

struct Cluster {
  int lo, hi;
  int rep;
  int mass;
  double inv_sqrt_mass;
  double pos;
  double pos_prev;
};

void check_time(const rng::TimeGrid& grid, double t, const char* who) {
  if (!(t >= 0.0) || !(t <= grid.horizon))
    throw std::invalid_argument(std::string(who) + ": t outside [0, horizon]");
}

}  // namespace

int representative_of(const IndexInterval& members, const IndexInterval& domain,
                      Variant variant) {
  if (members.lo > members.hi)
    throw std::invalid_argument("representative_of: empty member interval");
  if (members.lo < domain.lo || members.hi > domain.hi)
    throw std::invalid_argument("representative_of: members outside domain");
  switch (variant) {
    case Variant::plus:
      return members.lo;
    case Variant::minus:
      return members.hi;
    case Variant::full: {
      // Member closest to the domain midpoint; a half-integer midpoint ties
      // two members and the smaller index wins, which is exactly the floor.
      const long long a2 = static_cast<long long>(domain.lo) + domain.hi;
      long long mid = (a2 >= 0) ? a2 / 2 : -((-a2 + 1) / 2);  // floor(a2 / 2)
      if (mid < members.lo) mid = members.lo;
      if (mid > members.hi) mid = members.hi;
      return static_cast<int>(mid);
    }
  }
  throw std::invalid_argument("representative_of: unknown variant");
}

FlowRealization apply_flow_map(const rng::DrivingEnsemble& ensemble,
                               IndexInterval domain, Variant variant,
                               bool bridge) {
  if (domain.lo > domain.hi)
    throw std::invalid_argument("apply_flow_map: empty domain");
  if (domain.lo < ensemble.index_lo || domain.hi > ensemble.index_hi)
    throw std::invalid_argument("apply_flow_map: domain outside ensemble");
  const int n = domain.size();
  const int m = ensemble.grid.steps;
  const double dt = ensemble.grid.dt;

  FlowRealization flow;
  flow.domain = domain;
  flow.grid = ensemble.grid;
  flow.variant = variant;
  flow.seeds = ensemble.seeds;
  flow.positions.resize(n);
  for (auto& row : flow.positions) row.resize(m + 1);
  flow.mass_steps.assign(n, {MassStep{0, 1}});

  std::vector<Cluster> cl(n);
  for (int k = domain.lo; k <= domain.hi; ++k) {
    cl[k - domain.lo] =
        Cluster{k, k, k, 1, 1.0, static_cast<double>(k), static_cast<double>(k)};
    flow.positions[k - domain.lo][0] = static_cast<double>(k);
  }
  std::vector<char> forced(n > 0 ? n - 1 : 0, 0);  // keyed by boundary k = hi of left cluster

  for (int i = 0; i < m; ++i) {
    for (auto& c : cl) {
      c.pos_prev = c.pos;
      // an unmerged cluster is its driver, bit for bit; only merged clusters
      // accumulate scaled increments from their snap position
      if (c.mass == 1)
        c.pos = ensemble.value(c.rep, i + 1);
      else
        c.pos += (ensemble.value(c.rep, i + 1) - ensemble.value(c.rep, i)) *
                 c.inv_sqrt_mass;
    }

    if (bridge && cl.size() > 1) {
      for (size_t s = 0; s + 1 < cl.size(); ++s) {
        const Cluster& a = cl[s];
        const Cluster& b = cl[s + 1];
        const double d0 = b.pos_prev - a.pos_prev;
        const double d1 = b.pos - a.pos;
        if (d0 > 0.0 && d1 > 0.0) {
          const double sigma2 =
              1.0 / static_cast<double>(a.mass) + 1.0 / static_cast<double>(b.mass);
          const double p = rng::bridge_crossing_prob(d0, d1, sigma2, dt);
          const double u =
              rng::uniform_draw(ensemble.seeds.master_seed,
                                ensemble.seeds.replication_id, a.hi,
                                static_cast<uint32_t>(i), rng::StreamTag::flow_bridge);
          forced[a.hi - domain.lo] = (u < p);
        } else {
          forced[a.hi - domain.lo] = 0;
        }
      }
    }

    // Collision resolution: merge maximal runs of touching/crossing (or
    // bridge-forced) adjacent clusters; a snap can create new contacts, so
    // rescan until the positions are strictly increasing across clusters.
    bool use_forced = bridge;
    bool dirty = true;
    while (dirty) {
      dirty = false;
      size_t s = 0;
      while (s + 1 < cl.size()) {
        auto viol = [&](size_t q) {
          if (cl[q].pos >= cl[q + 1].pos) return true;
          return use_forced && forced[cl[q].hi - domain.lo] != 0;
        };
        if (!viol(s)) {
          ++s;
          continue;
        }
        size_t e = s + 1;
        while (e + 1 < cl.size() && viol(e)) ++e;
        // merge clusters s..e
        IndexInterval members{cl[s].lo, cl[e].hi};
        int mass = 0;
        for (size_t q = s; q <= e; ++q) mass += cl[q].mass;
        const int rep = representative_of(members, domain, variant);
        double pos = cl[s].pos;
        for (size_t q = s; q <= e; ++q)
          if (cl[q].lo <= rep && rep <= cl[q].hi) pos = cl[q].pos;
        flow.events.push_back(MergeEvent{
            i + 1, IndexInterval{cl[s].lo, cl[s].hi},
            IndexInterval{cl[e].lo, cl[e].hi}, mass, rep});
        Cluster merged{members.lo, members.hi, rep,         mass,
                       1.0 / std::sqrt(static_cast<double>(mass)), pos, pos};
        cl[s] = merged;
        cl.erase(cl.begin() + s + 1, cl.begin() + e + 1);
        for (int k = members.lo; k <= members.hi; ++k) {
          auto& steps = flow.mass_steps[k - domain.lo];
          if (steps.back().grid_index == i + 1) steps.back().mass = mass;
          else steps.push_back(MassStep{i + 1, mass});
        }
        dirty = true;
        if (s > 0) --s;
      }
      use_forced = false;  // bridge draws trigger once; snaps rescan on contact only
    }

    for (const auto& c : cl)
      for (int k = c.lo; k <= c.hi; ++k) flow.positions[k - domain.lo][i + 1] = c.pos;
  }
  return flow;
}

int mass_at(const FlowRealization& flow, int k, double t) {
  if (!flow.domain.contains(k))
    throw std::invalid_argument("mass_at: k outside domain");
  check_time(flow.grid, t, "mass_at");
  const auto& steps = flow.mass_steps[k - flow.domain.lo];
  int mass = steps.front().mass;
  for (const auto& st : steps) {
    if (flow.grid.time(st.grid_index) <= t) mass = st.mass;
    else break;
  }
  return mass;
}

double quadratic_variation(const FlowRealization& flow, int k, double t) {
  if (!flow.domain.contains(k))
    throw std::invalid_argument("quadratic_variation: k outside domain");
  check_time(flow.grid, t, "quadratic_variation");
  const double dt = flow.grid.dt;
  // number of grid steps whose left endpoint t_i lies strictly below t
  int i_end = static_cast<int>(std::ceil(t / dt - 1e-9));
  if (i_end < 0) i_end = 0;
  if (i_end > flow.grid.steps) i_end = flow.grid.steps;
  const auto& steps = flow.mass_steps[k - flow.domain.lo];
  double sum = 0.0;
  for (size_t s = 0; s < steps.size(); ++s) {
    const int seg_lo = steps[s].grid_index;
    const int seg_hi = (s + 1 < steps.size()) ? steps[s + 1].grid_index : i_end;
    const int lo = seg_lo, hi = std::min(seg_hi, i_end);
    if (hi > lo) sum += dt * static_cast<double>(hi - lo) / steps[s].mass;
    if (seg_hi >= i_end) break;
  }
  return sum;
}

}  // namespace mmaf::flow
