#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "mmaf/coalescing_flow.hpp"

namespace mmaf::occupation {

// 1-periodic test function. bound is sup|f|; derivative_at_0 and is_odd are
// needed by the small-time variance experiment.
struct PeriodicFunction {
  std::string id;
  std::function<double(double)> eval;
  double bound = 1.0;
  std::optional<double> derivative_at_0;
  bool is_odd = false;
};

// Built-ins: "sin2pi" (sin(2 pi x)), "one" (constant 1), "halfind"
// (indicator of (0, 1/2] mod 1).
const PeriodicFunction& builtin_function(const std::string& id);

// Number of distinct cluster positions in (a, b] at grid time t.
int occupation_count(const flow::FlowRealization& flow, double a, double b,
                     double t);

// A_k = sum of f over distinct cluster positions in (k-1+offset, k+offset].
double functional_A(const flow::FlowRealization& flow, int k, double t,
                    const PeriodicFunction& f, double offset = 0.0);

// A_k for every k in [k_lo, k_hi], one scan over the clusters.
struct OccupationSample {
  int k_lo = 0;
  int k_hi = -1;
  double t = 0.0;
  double offset = 0.0;
  std::string function_id;
  std::vector<double> values;

  int size() const { return k_hi - k_lo + 1; }
  double value(int k) const { return values[k - k_lo]; }
};

OccupationSample occupation_sample(const flow::FlowRealization& flow, int k_lo,
                                   int k_hi, double t,
                                   const PeriodicFunction& f,
                                   double offset = 0.0);

// Centered, scaled window sum: sum_{k=1..n} (A_k - mean_A) / sqrt(n).
double clt_statistic(const OccupationSample& sample, int n, double mean_A);

// Truncated stationary variance series: var0 + 2 * sum_{k=1..k_max} covs[k-1].
double sigma_series(double var0, std::span<const double> covs, int k_max);

}  // namespace mmaf::occupation
