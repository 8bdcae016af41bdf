#include "mmaf/occupation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mmaf::occupation {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double require_time_index(const flow::FlowRealization& f, double t,
                          const char* who) {
  auto idx = f.grid.index_of(t);
  if (!idx)
    throw std::invalid_argument(std::string(who) + ": t is not a grid time");
  return *idx;
}

}  // namespace

const PeriodicFunction& builtin_function(const std::string& id) {
  // reduce to the nearest-integer fraction first: exact zero at integers,
  // and the sine argument stays small for positions far from the origin
  static const PeriodicFunction sin2pi{
      "sin2pi",
      [](double x) { return std::sin(kTwoPi * (x - std::nearbyint(x))); }, 1.0,
      kTwoPi, true};
  static const PeriodicFunction one{"one", [](double) { return 1.0; }, 1.0,
                                    std::nullopt, false};
  // indicator of (0, 1/2] within each unit cell
  static const PeriodicFunction halfind{
      "halfind",
      [](double x) {
        const double frac = x - std::floor(x);
        return (frac > 0.0 && frac <= 0.5) ? 1.0 : 0.0;
      },
      1.0, std::nullopt, false};
  if (id == "sin2pi") return sin2pi;
  if (id == "one") return one;
  if (id == "halfind") return halfind;
  throw std::invalid_argument("builtin_function: unknown id '" + id + "'");
}

int occupation_count(const flow::FlowRealization& f, double a, double b,
                     double t) {
  if (!(a < b)) throw std::invalid_argument("occupation_count: need a < b");
  const int i = static_cast<int>(require_time_index(f, t, "occupation_count"));
  int count = 0;
  double prev = 0.0;
  bool have_prev = false;
  for (int k = f.domain.lo; k <= f.domain.hi; ++k) {
    const double x = f.positions[k - f.domain.lo][i];
    if (have_prev && x == prev) continue;  // same cluster, one distinct point
    prev = x;
    have_prev = true;
    if (x > a && x <= b) ++count;
  }
  return count;
}

double functional_A(const flow::FlowRealization& f, int k, double t,
                    const PeriodicFunction& fn, double offset) {
  const int i = static_cast<int>(require_time_index(f, t, "functional_A"));
  const double lo = static_cast<double>(k) - 1.0 + offset;
  const double hi = static_cast<double>(k) + offset;
  double sum = 0.0;
  double prev = 0.0;
  bool have_prev = false;
  for (int j = f.domain.lo; j <= f.domain.hi; ++j) {
    const double x = f.positions[j - f.domain.lo][i];
    if (have_prev && x == prev) continue;
    prev = x;
    have_prev = true;
    if (x > lo && x <= hi) sum += fn.eval(x);
  }
  return sum;
}

OccupationSample occupation_sample(const flow::FlowRealization& f, int k_lo,
                                   int k_hi, double t,
                                   const PeriodicFunction& fn, double offset) {
  if (k_lo > k_hi)
    throw std::invalid_argument("occupation_sample: empty cell range");
  const int i = static_cast<int>(require_time_index(f, t, "occupation_sample"));
  OccupationSample out;
  out.k_lo = k_lo;
  out.k_hi = k_hi;
  out.t = t;
  out.offset = offset;
  out.function_id = fn.id;
  out.values.assign(static_cast<size_t>(k_hi - k_lo + 1), 0.0);
  double prev = 0.0;
  bool have_prev = false;
  for (int j = f.domain.lo; j <= f.domain.hi; ++j) {
    const double x = f.positions[j - f.domain.lo][i];
    if (have_prev && x == prev) continue;
    prev = x;
    have_prev = true;
    // cell index k with x in (k - 1 + offset, k + offset]
    int k = static_cast<int>(std::ceil(x - offset));
    // guard the rounding so the interval predicate holds exactly
    while (x > static_cast<double>(k) + offset) ++k;
    while (x <= static_cast<double>(k) - 1.0 + offset) --k;
    if (k >= k_lo && k <= k_hi) out.values[k - k_lo] += fn.eval(x);
  }
  return out;
}

double clt_statistic(const OccupationSample& sample, int n, double mean_A) {
  if (n < 1) throw std::invalid_argument("clt_statistic: need n >= 1");
  if (sample.size() < n)
    throw std::invalid_argument("clt_statistic: sample has fewer than n cells");
  double sum = 0.0;
  for (int q = 0; q < n; ++q) sum += sample.values[q] - mean_A;
  return sum / std::sqrt(static_cast<double>(n));
}

double sigma_series(double var0, std::span<const double> covs, int k_max) {
  if (k_max < 0) throw std::invalid_argument("sigma_series: k_max < 0");
  if (static_cast<int>(covs.size()) < k_max)
    throw std::invalid_argument("sigma_series: not enough covariance lags");
  double s = var0;
  for (int k = 1; k <= k_max; ++k) s += 2.0 * covs[k - 1];
  return s;
}

}  // namespace mmaf::occupation
