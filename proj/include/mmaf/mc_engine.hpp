#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmaf/coupling.hpp"

namespace mmaf::mc {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  int reps = 0;
};

// Mean with standard error of the mean.
Estimate estimate(std::span<const double> samples);

// Sample variance with its asymptotic standard error.
Estimate variance_estimate(std::span<const double> samples);

double skewness(std::span<const double> samples);
double excess_kurtosis(std::span<const double> samples);

// Normality test of standardized samples against N(0,1), with the null
// distribution of the statistic drawn by parametric bootstrap (parameters
// re-estimated on every bootstrap draw). Needs >= 50 samples. Null tables are
// cached per (sample size, bootstrap count, seed).
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool applicable = false;
};

KsResult ks_normal_test(std::span<const double> samples,
                        uint64_t seed = 0x6b73u, int bootstrap = 2000);

// Deterministic parallel map: body(i) runs exactly once for every i in
// [0, count); results must be written to per-index slots so that any worker
// count yields identical output.
void parallel_for(int count, int workers, const std::function<void(int)>& body);

struct ExperimentConfig {
  double T = 1.0;
  int M = 2000;
  std::vector<double> t_values;  // per-experiment default when empty
  int n = 512;
  int reps = 0;     // 0 -> per-experiment default
  int pad = -1;     // -1 -> ceil(4 sqrt(T)) + 8
  std::string function_id = "sin2pi";
  double offset = 0.0;
  uint64_t master_seed = 20260817ull;
  int k_max = 32;
  bool bridge = false;
  int workers = 0;  // 0 -> hardware concurrency
};

int default_pad(double T);
int resolved_pad(const ExperimentConfig& cfg);
int resolved_workers(const ExperimentConfig& cfg);

// Occupation CLT experiment at a single evaluation time (default T):
// Y = sum_{k=1..n} (A_k - mean_A)/sqrt(n) per replication, plus the variance
// series needed to compare var(Y) with sigma_series.
struct CltReport {
  std::vector<double> Y;
  double mean_A = 0.0;
  Estimate var_Y;
  double sigma_value = 0.0;
  double sigma_se = 0.0;
  double var0 = 0.0;
  std::vector<double> cov;  // lag 1..2*k_max
  std::vector<double> cov_se;
  double tail_max_ratio = 0.0;  // max |cov_k|/se_k over k in (k_max, 2 k_max]
  KsResult ks;
  double skew = 0.0;
  double ex_kurtosis = 0.0;
  double t_eval = 0.0;
};

CltReport run_clt(const ExperimentConfig& cfg);

// Occupation moments E|integral of f over (a, b]|^p on a grid of times
// (12 rows per p: index 0 plus 11 evenly spaced grid indices up to T).
struct MomentRow {
  double t = 0.0;
  int p = 0;
  double estimate = 0.0;
  double se = 0.0;
};

struct MomentsReport {
  std::vector<MomentRow> rows;
  double a = 0.0, b = 3.0;
};

MomentsReport run_moments(const ExperimentConfig& cfg, std::vector<int> p_list,
                          double a = 0.0, double b = 3.0);

// Small-time variance of offset-1/2 occupation functionals, reported as
// sigma^2_t / t per requested t. Each t gets its own grid with horizon t and
// cfg.M steps (cfg.M >= 100 keeps dt <= t/100).
struct SmallTimeRow {
  double t = 0.0;
  double sigma2_over_t = 0.0;
  double se = 0.0;
  double var0_over_t = 0.0;
  double tail_ratio = 0.0;  // 2 sum_k |cov_k| / var0
};

struct SmallTimeReport {
  std::vector<SmallTimeRow> rows;
};

SmallTimeReport run_small_time(const ExperimentConfig& cfg,
                               std::vector<double> ts);

// Covariance decay of occupation functionals at one time, pooled over a
// window of n interval indices, with a log|cov| ~ sqrt(k) regression over the
// significant lags (|cov| > 4 se).
struct DecayRegression {
  double slope = 0.0;
  double slope_se = 0.0;
  double upper95 = 0.0;  // one-sided 95% upper confidence bound for the slope
  int used_lags = 0;
};

struct DecayReport {
  coupling::DecaySeries series;
  double var0 = 0.0;
  double var0_se = 0.0;
  DecayRegression regression;
  double t_eval = 0.0;
};

DecayReport run_covariance_decay(const ExperimentConfig& cfg);

// Gap-probability study: Monte Carlo event frequency vs the exact formula,
// at step count M and at 2M (dt halved) for a grid-refinement check.
struct GapCase {
  int j = 0;
  double t = 1.0;
  int M = 2000;
};

struct GapProbRow {
  GapCase cfg;
  double est_coarse = 0.0, se_coarse = 0.0;
  double est_fine = 0.0, se_fine = 0.0;  // at 2M
  double exact = 0.0;
};

std::vector<GapProbRow> run_gap_probabilities(const ExperimentConfig& cfg,
                                              std::vector<GapCase> cases);

// Pathwise coupling study on shared noise at l = 0: fraction of gap-event
// replications where the one-sided map agrees bitwise above the gap.
struct CouplingRow {
  coupling::Side side = coupling::Side::plus;
  int j = 0;
  int p = 0;
  int occurrences = 0;
  int agreements = 0;
};

struct CouplingReport {
  std::vector<CouplingRow> rows;
  int reps = 0;
  int top = 0;  // half-width of the centered domain
};

CouplingReport run_coupling(const ExperimentConfig& cfg, int j_max = 3);

struct MixingReport {
  std::vector<GapProbRow> gap_rows;
  CouplingReport coupling;
  DecayReport decay;
};

MixingReport run_mixing(const ExperimentConfig& cfg);

}  // namespace mmaf::mc
