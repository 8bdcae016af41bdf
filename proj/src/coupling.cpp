#include "mmaf/coupling.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mmaf::coupling {

namespace {

// Safe-side distance to the barrier, or a negative value when the grid point
// itself already violates the constraint. below = true means the driver must
// stay at or below the barrier.
inline double margin(double w, double barrier, bool below) {
  return below ? barrier - w : w - barrier;
}

struct EventSpec {
  int k_first, k_last;  // constrained drivers, consecutive
  double barrier;
  bool below_first;  // k_first..k_last-1 share one side, k_last is the other
};

EventSpec event_spec(int l, int j, Side side) {
  if (j < 0) throw std::invalid_argument("gap_event: j must be >= 0");
  if (side == Side::plus)
    return EventSpec{l, l + j + 1, static_cast<double>(l) + j + 0.5, true};
  return EventSpec{l - j - 1, l, static_cast<double>(l) - j - 0.5, false};
}

// Drivers k_first..k_last-1 stay on one side of the barrier (inclusive),
// driver k_last strictly on the other -- except for the minus side, where the
// roles mirror: k_first is the strict outlier and k_first+1..k_last stay at or
// above the barrier.
bool driver_ok(const EventSpec& s, int k, double w) {
  const bool strict = (s.below_first ? k == s.k_last : k == s.k_first);
  const bool below = strict ? !s.below_first : s.below_first;
  if (strict) return below ? w < s.barrier : w > s.barrier;
  return below ? w <= s.barrier : w >= s.barrier;
}

bool driver_side_below(const EventSpec& s, int k) {
  const bool strict = (s.below_first ? k == s.k_last : k == s.k_first);
  return strict ? !s.below_first : s.below_first;
}

}  // namespace

bool gap_event(const rng::DrivingEnsemble& ensemble, int l, int j, double t,
               Side side, bool bridge) {
  const EventSpec s = event_spec(l, j, side);
  if (!ensemble.contains(s.k_first) || !ensemble.contains(s.k_last))
    throw std::invalid_argument(
        "gap_event: required driver indices outside the ensemble");
  const auto idx = ensemble.grid.index_of(t);
  if (!idx) throw std::invalid_argument("gap_event: t is not a grid time");
  const int m = *idx;
  const double dt = ensemble.grid.dt;

  for (int k = s.k_first; k <= s.k_last; ++k) {
    const bool below = driver_side_below(s, k);
    const auto& w = ensemble.path(k);
    for (int i = 1; i <= m; ++i)
      if (!driver_ok(s, k, w[i])) return false;
    if (bridge) {
      for (int i = 0; i < m; ++i) {
        const double d0 = margin(w[i], s.barrier, below);
        const double d1 = margin(w[i + 1], s.barrier, below);
        // both endpoints on the safe side here; d can be 0 only at the strict
        // boundary, where the grid check has already failed
        const double p = rng::bridge_crossing_prob(d0, d1, 1.0, dt);
        const double u =
            rng::uniform_draw(ensemble.seeds.master_seed,
                              ensemble.seeds.replication_id, k,
                              static_cast<uint32_t>(i),
                              rng::StreamTag::event_bridge);
        if (u < p) return false;
      }
    }
  }
  return true;
}

bool gap_union(const rng::DrivingEnsemble& ensemble, int l, int N, double t,
               Side side, bool bridge) {
  if (N < 1) throw std::invalid_argument("gap_union: N must be >= 1");
  for (int j = 1; j <= N; ++j)
    if (gap_event(ensemble, l, j, t, side, bridge)) return true;
  return false;
}

bool gap_event_streamed(uint64_t master_seed, uint32_t replication_id,
                        const rng::TimeGrid& grid, int l, int j, Side side,
                        bool bridge) {
  const EventSpec s = event_spec(l, j, side);
  const int m = grid.steps;
  const double dt = grid.dt;
  const double sdt = std::sqrt(dt);
  std::vector<double> z(static_cast<size_t>(m));

  // Evaluate driver by driver, regenerating its increments; identical in
  // result to gap_event over sample_driving since both are pure functions of
  // the same draws. Start with the strict-side driver: it fails fastest.
  const int strict_k = s.below_first ? s.k_last : s.k_first;
  for (int pass = 0; pass < 2; ++pass) {
    for (int k = s.k_first; k <= s.k_last; ++k) {
      const bool is_strict = (k == strict_k);
      if ((pass == 0) != is_strict) continue;
      const bool below = driver_side_below(s, k);
      rng::normal_block(master_seed, replication_id, k,
                        rng::StreamTag::increment, 0,
                        static_cast<uint32_t>(m), z.data());
      double w = static_cast<double>(k);
      double prev = w;
      for (int i = 0; i < m; ++i) {
        w = w + sdt * z[i];
        if (!driver_ok(s, k, w)) return false;
        if (bridge) {
          const double d0 = margin(prev, s.barrier, below);
          const double d1 = margin(w, s.barrier, below);
          const double p = rng::bridge_crossing_prob(d0, d1, 1.0, dt);
          const double u = rng::uniform_draw(master_seed, replication_id, k,
                                             static_cast<uint32_t>(i),
                                             rng::StreamTag::event_bridge);
          if (u < p) return false;
        }
        prev = w;
      }
    }
  }
  return true;
}

double exact_gap_prob(int j, double t) {
  if (j < 0) throw std::invalid_argument("exact_gap_prob: j must be >= 0");
  if (!(t > 0.0)) throw std::invalid_argument("exact_gap_prob: t must be > 0");
  // P(max_{[0,t]} W <= a) = 2 Phi(a / sqrt(t)) - 1 = erf(a / sqrt(2 t))
  const double root = std::sqrt(2.0 * t);
  double p = std::erf(0.5 / root);
  for (int mth = 0; mth <= j; ++mth)
    p *= std::erf((static_cast<double>(mth) + 0.5) / root);
  return p;
}

bool verify_coupling(const flow::FlowRealization& full,
                     const flow::FlowRealization& half, int l, int j, int p,
                     Side side) {
  if (!(full.grid == half.grid))
    throw std::invalid_argument("verify_coupling: grids differ");
  if (full.seeds.master_seed != half.seeds.master_seed ||
      full.seeds.replication_id != half.seeds.replication_id)
    throw std::invalid_argument(
        "verify_coupling: realizations built from different seed records");
  if (full.variant != flow::Variant::full)
    throw std::invalid_argument("verify_coupling: first map must be centered");
  if (j < 0 || p < 0 || p > j)
    throw std::invalid_argument("verify_coupling: need 0 <= p <= j");

  int k_lo, k_hi;
  if (side == Side::plus) {
    if (half.variant != flow::Variant::plus)
      throw std::invalid_argument("verify_coupling: side/variant mismatch");
    if (l < 0)
      throw std::invalid_argument(
          "verify_coupling: plus side requires l >= 0 (restricted regime)");
    if (half.domain.lo != l + p || half.domain.hi != full.domain.hi)
      throw std::invalid_argument(
          "verify_coupling: one-sided domain must be [l+p, full domain top]");
    k_lo = l + j + 1;
    k_hi = full.domain.hi;
  } else {
    if (half.variant != flow::Variant::minus)
      throw std::invalid_argument("verify_coupling: side/variant mismatch");
    if (l > 0)
      throw std::invalid_argument(
          "verify_coupling: minus side requires l <= 0 (restricted regime)");
    if (half.domain.hi != l - p || half.domain.lo != full.domain.lo)
      throw std::invalid_argument(
          "verify_coupling: one-sided domain must be [full domain bottom, l-p]");
    k_lo = full.domain.lo;
    k_hi = l - j - 1;
  }
  if (k_lo > k_hi) return true;  // nothing beyond the gap to compare

  for (int k = k_lo; k <= k_hi; ++k) {
    const auto& a = full.path(k);
    const auto& b = half.path(k);
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

DecaySeries covariance_decay(
    const std::vector<occupation::OccupationSample>& samples, int k_max) {
  if (k_max < 1)
    throw std::invalid_argument(
        "covariance_decay: lags start at 1, need k_max >= 1");
  if (samples.size() < 2)
    throw std::invalid_argument("covariance_decay: need at least 2 samples");
  const int n = samples.front().size();
  if (n <= k_max)
    throw std::invalid_argument(
        "covariance_decay: window too small for requested lags");
  for (const auto& s : samples)
    if (s.k_lo != samples.front().k_lo || s.k_hi != samples.front().k_hi ||
        s.t != samples.front().t || s.offset != samples.front().offset ||
        s.function_id != samples.front().function_id)
      throw std::invalid_argument("covariance_decay: samples not comparable");

  const int reps = static_cast<int>(samples.size());
  double pooled = 0.0;
  for (const auto& s : samples)
    for (double v : s.values) pooled += v;
  pooled /= static_cast<double>(reps) * n;

  DecaySeries out;
  out.k_max = k_max;
  out.reps = reps;
  out.cov.assign(k_max, 0.0);
  out.se.assign(k_max, 0.0);
  std::vector<double> per_rep(static_cast<size_t>(reps));
  for (int k = 1; k <= k_max; ++k) {
    for (int r = 0; r < reps; ++r) {
      const auto& v = samples[r].values;
      double acc = 0.0;
      for (int q = 0; q + k < n; ++q)
        acc += (v[q] - pooled) * (v[q + k] - pooled);
      per_rep[r] = acc / static_cast<double>(n - k);
    }
    double mean = 0.0;
    for (double c : per_rep) mean += c;
    mean /= reps;
    double ss = 0.0;
    for (double c : per_rep) ss += (c - mean) * (c - mean);
    out.cov[k - 1] = mean;
    out.se[k - 1] = std::sqrt(ss / (static_cast<double>(reps) - 1.0) / reps);
  }
  return out;
}

}  // namespace mmaf::coupling
