#include "mmaf/mc_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace mmaf::mc {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// central moments, plug-in (biased) denominators
std::array<double, 3> central_moments_234(std::span<const double> v) {
  const double m = mean_of(v);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - m;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(v.size());
  return {m2 / n, m3 / n, m4 / n};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double lilliefors_statistic(std::vector<double> z) {
  std::sort(z.begin(), z.end());
  const int n = static_cast<int>(z.size());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = normal_cdf(z[i]);
    d = std::max(d, u - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - u);
  }
  return d;
}

// standardize in place; returns false when the sample is degenerate
bool standardize(std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
  if (!(sd > 0.0)) return false;
  for (double& x : v) x = (x - m) / sd;
  return true;
}

const std::vector<double>& ks_null_table(int n, int bootstrap, uint64_t seed) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, uint64_t>,
                  std::unique_ptr<std::vector<double>>>
      cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{n, bootstrap, seed}];
  if (!slot) {
    auto table = std::make_unique<std::vector<double>>();
    table->reserve(bootstrap);
    std::vector<double> draw(static_cast<size_t>(n));
    for (int b = 0; b < bootstrap; ++b) {
      rng::normal_block(seed, static_cast<uint32_t>(b), 0,
                        rng::StreamTag::bootstrap, 0, static_cast<uint32_t>(n),
                        draw.data());
      std::vector<double> z = draw;
      if (!standardize(z)) {
        table->push_back(0.0);
        continue;
      }
      table->push_back(lilliefors_statistic(std::move(z)));
    }
    std::sort(table->begin(), table->end());
    slot = std::move(table);
  }
  return *slot;
}

struct RepSampler {
  const ExperimentConfig& cfg;
  rng::TimeGrid grid;
  flow::IndexInterval domain;
  int window_lo, window_hi;
  double t_eval;
  double offset;
  const occupation::PeriodicFunction* fn;

  occupation::OccupationSample operator()(int rep) const {
    auto ens = rng::sample_driving(domain.lo, domain.hi, grid, cfg.master_seed,
                                   static_cast<uint32_t>(rep));
    auto fl = flow::apply_flow_map(ens, domain, flow::Variant::full, cfg.bridge);
    return occupation::occupation_sample(fl, window_lo, window_hi, t_eval, *fn,
                                         offset);
  }
};

// per-replication lag moments around the pooled mean, denominator n - k
double lag_moment(const std::vector<double>& v, double pooled, int k) {
  const int n = static_cast<int>(v.size());
  double acc = 0.0;
  for (int q = 0; q + k < n; ++q)
    acc += (v[q] - pooled) * (v[q + k] - pooled);
  return acc / static_cast<double>(n - k);
}

}  // namespace

Estimate estimate(std::span<const double> samples) {
  require(samples.size() >= 2, "estimate: need at least 2 samples");
  const double m = mean_of(samples);
  double ss = 0.0;
  for (double x : samples) ss += (x - m) * (x - m);
  const double n = static_cast<double>(samples.size());
  return Estimate{m, std::sqrt(ss / (n - 1.0) / n),
                  static_cast<int>(samples.size())};
}

Estimate variance_estimate(std::span<const double> samples) {
  require(samples.size() >= 2, "variance_estimate: need at least 2 samples");
  const double n = static_cast<double>(samples.size());
  const auto m = central_moments_234(samples);
  const double s2 = m[0] * n / (n - 1.0);
  const double var_of_var = std::max(0.0, m[2] - m[0] * m[0]) / n;
  return Estimate{s2, std::sqrt(var_of_var),
                  static_cast<int>(samples.size())};
}

double skewness(std::span<const double> samples) {
  require(samples.size() >= 3, "skewness: need at least 3 samples");
  const auto m = central_moments_234(samples);
  require(m[0] > 0.0, "skewness: degenerate sample");
  return m[1] / std::pow(m[0], 1.5);
}

double excess_kurtosis(std::span<const double> samples) {
  require(samples.size() >= 4, "excess_kurtosis: need at least 4 samples");
  const auto m = central_moments_234(samples);
  require(m[0] > 0.0, "excess_kurtosis: degenerate sample");
  return m[2] / (m[0] * m[0]) - 3.0;
}

KsResult ks_normal_test(std::span<const double> samples, uint64_t seed,
                        int bootstrap) {
  require(samples.size() >= 50, "ks_normal_test: need at least 50 samples");
  require(bootstrap >= 100, "ks_normal_test: need at least 100 bootstrap draws");
  std::vector<double> z(samples.begin(), samples.end());
  if (!standardize(z)) return KsResult{0.0, 1.0, false};
  const double d = lilliefors_statistic(std::move(z));
  const auto& table =
      ks_null_table(static_cast<int>(samples.size()), bootstrap, seed);
  const auto it = std::lower_bound(table.begin(), table.end(), d);
  const auto greater_eq = static_cast<double>(table.end() - it);
  const double p = (1.0 + greater_eq) / (static_cast<double>(bootstrap) + 1.0);
  return KsResult{d, p, true};
}

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  require(count >= 0, "parallel_for: negative count");
  if (workers < 1) workers = 1;
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

int default_pad(double T) {
  return static_cast<int>(std::ceil(4.0 * std::sqrt(T))) + 8;
}

int resolved_pad(const ExperimentConfig& cfg) {
  return cfg.pad >= 0 ? cfg.pad : default_pad(cfg.T);
}

int resolved_workers(const ExperimentConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

CltReport run_clt(const ExperimentConfig& cfg) {
  require(cfg.T > 0.0 && cfg.M >= 1, "run_clt: invalid grid");
  require(cfg.n >= 2, "run_clt: window must hold at least 2 intervals");
  require(cfg.offset >= 0.0 && cfg.offset < 1.0, "run_clt: offset outside [0,1)");
  const int reps = cfg.reps > 0 ? cfg.reps : 2000;
  require(reps >= 2, "run_clt: need at least 2 replications");
  const auto grid = rng::make_grid(cfg.T, cfg.M);
  const double t_eval = cfg.t_values.empty() ? cfg.T : cfg.t_values.front();
  require(t_eval <= cfg.T, "run_clt: t exceeds T");
  require(grid.index_of(t_eval).has_value(), "run_clt: t is not a grid time");
  const int pad = resolved_pad(cfg);
  const auto& fn = occupation::builtin_function(cfg.function_id);

  RepSampler sampler{cfg,
                     grid,
                     flow::IndexInterval{1 - pad, cfg.n + pad},
                     1,
                     cfg.n,
                     t_eval,
                     cfg.offset,
                     &fn};
  std::vector<occupation::OccupationSample> samples(
      static_cast<size_t>(reps));
  parallel_for(reps, resolved_workers(cfg),
               [&](int r) { samples[r] = sampler(r); });

  const int n = cfg.n;
  double pooled = 0.0;
  for (const auto& s : samples)
    for (double v : s.values) pooled += v;
  pooled /= static_cast<double>(reps) * n;

  CltReport rep;
  rep.t_eval = t_eval;
  rep.mean_A = pooled;
  rep.Y.resize(reps);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (int r = 0; r < reps; ++r) {
    double acc = 0.0;
    for (double v : samples[r].values) acc += v - pooled;
    rep.Y[r] = acc / sqrt_n;
  }
  rep.var_Y = variance_estimate(rep.Y);

  const int lag_top = std::min(2 * cfg.k_max, n - 1);
  const int k_used = std::min(cfg.k_max, lag_top);
  rep.cov.assign(lag_top, 0.0);
  rep.cov_se.assign(lag_top, 0.0);
  std::vector<double> per_rep(static_cast<size_t>(reps));
  std::vector<double> series_rep(static_cast<size_t>(reps), 0.0);
  for (int r = 0; r < reps; ++r)
    series_rep[r] = lag_moment(samples[r].values, pooled, 0);
  rep.var0 = mean_of(series_rep);
  for (int k = 1; k <= lag_top; ++k) {
    for (int r = 0; r < reps; ++r) {
      per_rep[r] = lag_moment(samples[r].values, pooled, k);
      if (k <= k_used) series_rep[r] += 2.0 * per_rep[r];
    }
    const Estimate e = estimate(per_rep);
    rep.cov[k - 1] = e.value;
    rep.cov_se[k - 1] = e.se;
  }
  const Estimate sig = estimate(series_rep);
  rep.sigma_value = sig.value;
  rep.sigma_se = sig.se;
  rep.tail_max_ratio = 0.0;
  for (int k = k_used + 1; k <= lag_top; ++k)
    if (rep.cov_se[k - 1] > 0.0)
      rep.tail_max_ratio = std::max(
          rep.tail_max_ratio, std::abs(rep.cov[k - 1]) / rep.cov_se[k - 1]);

  if (rep.Y.size() >= 50) rep.ks = ks_normal_test(rep.Y);
  if (rep.ks.applicable) {
    rep.skew = skewness(rep.Y);
    rep.ex_kurtosis = excess_kurtosis(rep.Y);
  }
  return rep;
}

MomentsReport run_moments(const ExperimentConfig& cfg, std::vector<int> p_list,
                          double a, double b) {
  require(cfg.T > 0.0 && cfg.M >= 11, "run_moments: invalid grid");
  require(a < b, "run_moments: need a < b");
  for (int p : p_list) require(p >= 1, "run_moments: p must be >= 1");
  const int reps = cfg.reps > 0 ? cfg.reps : 3000;
  require(reps >= 2, "run_moments: need at least 2 replications");
  const auto grid = rng::make_grid(cfg.T, cfg.M);
  const int pad = resolved_pad(cfg);
  const auto& fn = occupation::builtin_function(cfg.function_id);
  const flow::IndexInterval domain{static_cast<int>(std::floor(a)) + 1 - pad,
                                   static_cast<int>(std::ceil(b)) + pad};

  // time indices: 0 plus 11 even subdivisions of [0, M]
  std::vector<int> t_idx{0};
  for (int q = 1; q <= 11; ++q)
    t_idx.push_back(static_cast<int>(
        std::llround(static_cast<double>(cfg.M) * q / 11.0)));
  const int nt = static_cast<int>(t_idx.size());

  std::vector<std::vector<double>> vals(
      static_cast<size_t>(reps), std::vector<double>(static_cast<size_t>(nt)));
  parallel_for(reps, resolved_workers(cfg), [&](int r) {
    auto ens = rng::sample_driving(domain.lo, domain.hi, grid, cfg.master_seed,
                                   static_cast<uint32_t>(r));
    auto fl = flow::apply_flow_map(ens, domain, flow::Variant::full, cfg.bridge);
    for (int q = 0; q < nt; ++q) {
      const int i = t_idx[q];
      double acc = 0.0;
      double prev = 0.0;
      bool have_prev = false;
      for (int k = domain.lo; k <= domain.hi; ++k) {
        const double x = fl.positions[k - domain.lo][i];
        if (have_prev && x == prev) continue;
        prev = x;
        have_prev = true;
        if (x > a && x <= b) acc += fn.eval(x);
      }
      vals[r][q] = acc;
    }
  });

  MomentsReport out;
  out.a = a;
  out.b = b;
  std::vector<double> powed(static_cast<size_t>(reps));
  for (int p : p_list) {
    for (int q = 0; q < nt; ++q) {
      for (int r = 0; r < reps; ++r)
        powed[r] = std::pow(std::abs(vals[r][q]), p);
      const Estimate e = estimate(powed);
      out.rows.push_back(MomentRow{grid.time(t_idx[q]), p, e.value, e.se});
    }
  }
  return out;
}

SmallTimeReport run_small_time(const ExperimentConfig& cfg,
                               std::vector<double> ts) {
  const auto& fn = occupation::builtin_function(cfg.function_id);
  require(fn.is_odd && fn.derivative_at_0.has_value(),
          "run_small_time: function must be odd with a derivative at 0");
  require(cfg.M >= 100, "run_small_time: need M >= 100 so dt <= t/100");
  require(!ts.empty(), "run_small_time: no evaluation times");
  for (double t : ts)
    require(t > 0.0 && t <= cfg.T, "run_small_time: t outside (0, T]");
  const int reps = cfg.reps > 0 ? cfg.reps : 5000;
  require(reps >= 2, "run_small_time: need at least 2 replications");

  const int n_cells = std::max(16, 2 * cfg.k_max);
  const int k_used = std::min(cfg.k_max, n_cells - 1);
  SmallTimeReport out;
  for (double t : ts) {
    const auto grid = rng::make_grid(t, cfg.M);
    const int pad = cfg.pad >= 0 ? cfg.pad : default_pad(t);
    ExperimentConfig sub = cfg;
    sub.T = t;
    RepSampler sampler{sub,
                       grid,
                       flow::IndexInterval{1 - pad, n_cells + pad},
                       1,
                       n_cells,
                       t,
                       0.5,  // centered intervals per the small-time analysis
                       &fn};
    std::vector<occupation::OccupationSample> samples(
        static_cast<size_t>(reps));
    parallel_for(reps, resolved_workers(cfg),
                 [&](int r) { samples[r] = sampler(r); });

    double pooled = 0.0;
    for (const auto& s : samples)
      for (double v : s.values) pooled += v;
    pooled /= static_cast<double>(reps) * n_cells;

    std::vector<double> series_rep(static_cast<size_t>(reps));
    std::vector<double> var_rep(static_cast<size_t>(reps));
    std::vector<double> abs_cov(static_cast<size_t>(k_used), 0.0);
    for (int r = 0; r < reps; ++r) {
      var_rep[r] = lag_moment(samples[r].values, pooled, 0);
      series_rep[r] = var_rep[r];
    }
    for (int k = 1; k <= k_used; ++k) {
      double lag_mean = 0.0;
      for (int r = 0; r < reps; ++r) {
        const double c = lag_moment(samples[r].values, pooled, k);
        series_rep[r] += 2.0 * c;
        lag_mean += c;
      }
      abs_cov[k - 1] = std::abs(lag_mean / reps);
    }
    const Estimate sig = estimate(series_rep);
    const Estimate var0 = estimate(var_rep);
    double tail = 0.0;
    for (double c : abs_cov) tail += c;
    out.rows.push_back(SmallTimeRow{t, sig.value / t, sig.se / t,
                                    var0.value / t,
                                    var0.value > 0.0 ? 2.0 * tail / var0.value
                                                     : 0.0});
  }
  return out;
}

DecayReport run_covariance_decay(const ExperimentConfig& cfg) {
  require(cfg.T > 0.0 && cfg.M >= 1, "run_covariance_decay: invalid grid");
  require(cfg.k_max >= 1, "run_covariance_decay: k_max must be >= 1");
  require(cfg.n > cfg.k_max, "run_covariance_decay: window too small");
  const int reps = cfg.reps > 0 ? cfg.reps : 5000;
  require(reps >= 2, "run_covariance_decay: need at least 2 replications");
  const auto grid = rng::make_grid(cfg.T, cfg.M);
  const double t_eval = cfg.t_values.empty() ? cfg.T : cfg.t_values.front();
  require(t_eval <= cfg.T, "run_covariance_decay: t exceeds T");
  require(grid.index_of(t_eval).has_value(),
          "run_covariance_decay: t is not a grid time");
  const int pad = resolved_pad(cfg);
  const auto& fn = occupation::builtin_function(cfg.function_id);

  RepSampler sampler{cfg,
                     grid,
                     flow::IndexInterval{1 - pad, cfg.n + pad},
                     1,
                     cfg.n,
                     t_eval,
                     cfg.offset,
                     &fn};
  std::vector<occupation::OccupationSample> samples(static_cast<size_t>(reps));
  parallel_for(reps, resolved_workers(cfg),
               [&](int r) { samples[r] = sampler(r); });

  DecayReport out;
  out.t_eval = t_eval;
  out.series = coupling::covariance_decay(samples, cfg.k_max);

  double pooled = 0.0;
  for (const auto& s : samples)
    for (double v : s.values) pooled += v;
  pooled /= static_cast<double>(reps) * cfg.n;
  std::vector<double> var_rep(static_cast<size_t>(reps));
  for (int r = 0; r < reps; ++r)
    var_rep[r] = lag_moment(samples[r].values, pooled, 0);
  const Estimate v0 = estimate(var_rep);
  out.var0 = v0.value;
  out.var0_se = v0.se;

  // one-sided regression of log|cov| on sqrt(k) over the significant lags.
  // Each point's measurement error is known from the replication spread
  // (delta method: sd(log|cov|) = se / |cov|), so the fit is weighted least
  // squares with a parametric slope error, valid from two points up. When
  // residual degrees of freedom exist, the error is inflated by
  // sqrt(chi2/dof) if the points scatter more than their error bars allow.
  std::vector<double> xs, ys, sigmas;
  for (int k = 1; k <= out.series.k_max; ++k) {
    const double c = out.series.cov[k - 1];
    const double se = out.series.se[k - 1];
    if (se > 0.0 && std::abs(c) > 4.0 * se) {
      xs.push_back(std::sqrt(static_cast<double>(k)));
      ys.push_back(std::log(std::abs(c)));
      sigmas.push_back(se / std::abs(c));
    }
  }
  DecayRegression reg;
  reg.used_lags = static_cast<int>(xs.size());
  if (reg.used_lags >= 2) {
    double wsum = 0.0, xm = 0.0, ym = 0.0;
    for (size_t q = 0; q < xs.size(); ++q) {
      const double w = 1.0 / (sigmas[q] * sigmas[q]);
      wsum += w;
      xm += w * xs[q];
      ym += w * ys[q];
    }
    xm /= wsum;
    ym /= wsum;
    double sxx = 0.0, sxy = 0.0;
    for (size_t q = 0; q < xs.size(); ++q) {
      const double w = 1.0 / (sigmas[q] * sigmas[q]);
      sxx += w * (xs[q] - xm) * (xs[q] - xm);
      sxy += w * (xs[q] - xm) * (ys[q] - ym);
    }
    reg.slope = sxy / sxx;
    reg.slope_se = std::sqrt(1.0 / sxx);
    const int dof = reg.used_lags - 2;
    if (dof > 0) {
      const double intercept = ym - reg.slope * xm;
      double chi2 = 0.0;
      for (size_t q = 0; q < xs.size(); ++q) {
        const double e = (ys[q] - intercept - reg.slope * xs[q]) / sigmas[q];
        chi2 += e * e;
      }
      reg.slope_se *= std::max(1.0, std::sqrt(chi2 / dof));
    }
    reg.upper95 = reg.slope + 1.6448536269514722 * reg.slope_se;
  } else {
    reg.slope = 0.0;
    reg.slope_se = std::numeric_limits<double>::infinity();
    reg.upper95 = std::numeric_limits<double>::infinity();
  }
  out.regression = reg;
  return out;
}

std::vector<GapProbRow> run_gap_probabilities(const ExperimentConfig& cfg,
                                              std::vector<GapCase> cases) {
  const int reps = cfg.reps > 0 ? cfg.reps : 10000;
  require(reps >= 2, "run_gap_probabilities: need at least 2 replications");
  std::vector<GapProbRow> rows;
  for (const GapCase& gc : cases) {
    require(gc.j >= 0 && gc.t > 0.0 && gc.M >= 1,
            "run_gap_probabilities: invalid case");
    const int fine_steps = 2 * gc.M;
    const double dt_f = gc.t / fine_steps;
    const double dt_c = 2.0 * dt_f;
    const double sdt_f = std::sqrt(dt_f);
    const int l = 0;
    const int k_first = l, k_last = l + gc.j + 1;
    const double barrier = static_cast<double>(l) + gc.j + 0.5;

    // flags bit 0: event on the coarse grid (every second fine point),
    // bit 1: event on the fine grid; shared driver paths couple the two.
    std::vector<uint8_t> flags(static_cast<size_t>(reps));
    parallel_for(reps, resolved_workers(cfg), [&](int r) {
      bool coarse_ok = true, fine_ok = true;
      std::vector<double> z(static_cast<size_t>(fine_steps));
      std::vector<double> w(static_cast<size_t>(fine_steps) + 1);
      for (int pass = 0; pass < 2 && (coarse_ok || fine_ok); ++pass) {
        for (int k = k_first; k <= k_last && (coarse_ok || fine_ok); ++k) {
          const bool is_strict = (k == k_last);
          if ((pass == 0) != is_strict) continue;
          const bool below = !is_strict;
          rng::normal_block(cfg.master_seed, static_cast<uint32_t>(r), k,
                            rng::StreamTag::increment, 0,
                            static_cast<uint32_t>(fine_steps), z.data());
          w[0] = static_cast<double>(k);
          for (int i = 0; i < fine_steps; ++i) w[i + 1] = w[i] + sdt_f * z[i];
          auto ok_at = [&](double x) {
            if (is_strict) return below ? x < barrier : x > barrier;
            return below ? x <= barrier : x >= barrier;
          };
          auto gap_to = [&](double x) { return below ? barrier - x : x - barrier; };
          // fine evaluation
          if (fine_ok) {
            for (int i = 1; i <= fine_steps && fine_ok; ++i)
              if (!ok_at(w[i])) fine_ok = false;
            if (fine_ok && cfg.bridge) {
              for (int i = 0; i < fine_steps && fine_ok; ++i) {
                const double p = rng::bridge_crossing_prob(
                    gap_to(w[i]), gap_to(w[i + 1]), 1.0, dt_f);
                const double u = rng::uniform_draw(
                    cfg.master_seed, static_cast<uint32_t>(r), k,
                    static_cast<uint32_t>(i), rng::StreamTag::event_bridge);
                if (u < p) fine_ok = false;
              }
            }
          }
          // coarse evaluation on the even-index skeleton of the same path
          if (coarse_ok) {
            for (int i = 2; i <= fine_steps && coarse_ok; i += 2)
              if (!ok_at(w[i])) coarse_ok = false;
            if (coarse_ok && cfg.bridge) {
              // draw indices continue past the fine range so the two grid
              // resolutions consume disjoint uniforms
              for (int i = 0; i < fine_steps && coarse_ok; i += 2) {
                const double p = rng::bridge_crossing_prob(
                    gap_to(w[i]), gap_to(w[i + 2]), 1.0, dt_c);
                const double u = rng::uniform_draw(
                    cfg.master_seed, static_cast<uint32_t>(r), k,
                    static_cast<uint32_t>(fine_steps + i),
                    rng::StreamTag::event_bridge);
                if (u < p) coarse_ok = false;
              }
            }
          }
        }
      }
      flags[r] = static_cast<uint8_t>((coarse_ok ? 1 : 0) | (fine_ok ? 2 : 0));
    });

    int coarse_hits = 0, fine_hits = 0;
    for (uint8_t f : flags) {
      coarse_hits += f & 1;
      fine_hits += (f >> 1) & 1;
    }
    GapProbRow row;
    row.cfg = gc;
    const double n = static_cast<double>(reps);
    row.est_coarse = coarse_hits / n;
    row.se_coarse = std::sqrt(row.est_coarse * (1.0 - row.est_coarse) / n);
    row.est_fine = fine_hits / n;
    row.se_fine = std::sqrt(row.est_fine * (1.0 - row.est_fine) / n);
    row.exact = coupling::exact_gap_prob(gc.j, gc.t);
    rows.push_back(row);
  }
  return rows;
}

CouplingReport run_coupling(const ExperimentConfig& cfg, int j_max) {
  require(j_max >= 1, "run_coupling: j_max must be >= 1");
  require(cfg.T > 0.0 && cfg.M >= 1, "run_coupling: invalid grid");
  const int reps = cfg.reps > 0 ? cfg.reps : 1500;
  require(reps >= 1, "run_coupling: need at least 1 replication");
  const auto grid = rng::make_grid(cfg.T, cfg.M);
  const int top = std::max(resolved_pad(cfg), j_max + 4);

  // entry layout per replication: sides (plus, minus) x j x p <= j
  int entries = 0;
  for (int j = 1; j <= j_max; ++j) entries += j + 1;
  entries *= 2;
  // 0 = event absent, 1 = occurred and agreed, 2 = occurred and disagreed
  std::vector<uint8_t> slots(static_cast<size_t>(reps) * entries, 0);

  parallel_for(reps, resolved_workers(cfg), [&](int r) {
    auto ens = rng::sample_driving(-top, top, grid, cfg.master_seed,
                                   static_cast<uint32_t>(r));
    auto full = flow::apply_flow_map(ens, flow::IndexInterval{-top, top},
                                     flow::Variant::full, false);
    std::vector<std::unique_ptr<flow::FlowRealization>> plus_maps(
        static_cast<size_t>(j_max) + 1);
    std::vector<std::unique_ptr<flow::FlowRealization>> minus_maps(
        static_cast<size_t>(j_max) + 1);
    uint8_t* out = slots.data() + static_cast<size_t>(r) * entries;
    int pos = 0;
    for (int side_ix = 0; side_ix < 2; ++side_ix) {
      const auto side =
          side_ix == 0 ? coupling::Side::plus : coupling::Side::minus;
      for (int j = 1; j <= j_max; ++j) {
        const bool occurred = coupling::gap_event(ens, 0, j, cfg.T, side, false);
        for (int p = 0; p <= j; ++p, ++pos) {
          if (!occurred) continue;
          auto& cacheslot =
              side == coupling::Side::plus ? plus_maps[p] : minus_maps[p];
          if (!cacheslot) {
            const auto dom = side == coupling::Side::plus
                                 ? flow::IndexInterval{p, top}
                                 : flow::IndexInterval{-top, -p};
            const auto variant = side == coupling::Side::plus
                                     ? flow::Variant::plus
                                     : flow::Variant::minus;
            cacheslot = std::make_unique<flow::FlowRealization>(
                flow::apply_flow_map(ens, dom, variant, false));
          }
          const bool agree =
              coupling::verify_coupling(full, *cacheslot, 0, j, p, side);
          out[pos] = agree ? 1 : 2;
        }
      }
    }
  });

  CouplingReport report;
  report.reps = reps;
  report.top = top;
  int pos = 0;
  for (int side_ix = 0; side_ix < 2; ++side_ix) {
    for (int j = 1; j <= j_max; ++j) {
      for (int p = 0; p <= j; ++p, ++pos) {
        CouplingRow row;
        row.side =
            side_ix == 0 ? coupling::Side::plus : coupling::Side::minus;
        row.j = j;
        row.p = p;
        for (int r = 0; r < reps; ++r) {
          const uint8_t v = slots[static_cast<size_t>(r) * entries + pos];
          if (v != 0) {
            ++row.occurrences;
            if (v == 1) ++row.agreements;
          }
        }
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

MixingReport run_mixing(const ExperimentConfig& cfg) {
  MixingReport out;
  ExperimentConfig gap_cfg = cfg;
  if (gap_cfg.reps <= 0) gap_cfg.reps = 10000;
  out.gap_rows = run_gap_probabilities(
      gap_cfg, {GapCase{0, 1.0, cfg.M}, GapCase{2, 0.25, cfg.M},
                GapCase{5, 0.1, cfg.M}});

  ExperimentConfig cpl_cfg = cfg;
  if (cpl_cfg.reps <= 0) cpl_cfg.reps = 1000;
  cpl_cfg.T = std::min(cfg.T, 0.25);
  cpl_cfg.M = std::max(1, cfg.M / 4);
  out.coupling = run_coupling(cpl_cfg);

  ExperimentConfig dec_cfg = cfg;
  if (dec_cfg.reps <= 0) dec_cfg.reps = 2000;
  if (dec_cfg.n > 256) dec_cfg.n = 256;
  if (dec_cfg.k_max > 25) dec_cfg.k_max = 25;
  out.decay = run_covariance_decay(dec_cfg);
  return out;
}

}  // namespace mmaf::mc
