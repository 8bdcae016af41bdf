#include "mmaf/cli_io.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"

#include "mmaf/coalescing_flow.hpp"
#include "mmaf/occupation.hpp"

namespace mmaf::cli {

namespace {

using nlohmann::ordered_json;

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "T",      "M",   "t",      "n",       "reps", "pad",
      "seed",   "function", "offset", "kmax", "bridge", "out",
      "format", "workers",  "p",      "occupation_out"};
  return keys;
}

void apply_config_file(const std::string& path, CLI::App* sub, Options& opt,
                       std::map<std::string, std::string>& sources) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read file " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");

  auto flag_given = [&](const char* name) { return sub->count(name) > 0; };
  for (const auto& [key, val] : doc.items()) {
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("unknown config key: " + key);
    try {
      if (key == "T" && !flag_given("--T")) opt.cfg.T = val.get<double>();
      else if (key == "M" && !flag_given("--M")) opt.cfg.M = val.get<int>();
      else if (key == "t" && !flag_given("--t")) {
        opt.cfg.t_values.clear();
        if (val.is_array())
          for (const auto& v : val) opt.cfg.t_values.push_back(v.get<double>());
        else
          opt.cfg.t_values.push_back(val.get<double>());
      } else if (key == "n" && !flag_given("--n")) opt.cfg.n = val.get<int>();
      else if (key == "reps" && !flag_given("--reps")) opt.cfg.reps = val.get<int>();
      else if (key == "pad" && !flag_given("--pad")) opt.cfg.pad = val.get<int>();
      else if (key == "seed" && !flag_given("--seed"))
        opt.cfg.master_seed = val.get<uint64_t>();
      else if (key == "function" && !flag_given("--function"))
        opt.cfg.function_id = val.get<std::string>();
      else if (key == "offset" && !flag_given("--offset"))
        opt.cfg.offset = val.get<double>();
      else if (key == "kmax" && !flag_given("--kmax"))
        opt.cfg.k_max = val.get<int>();
      else if (key == "bridge" && !flag_given("--bridge"))
        opt.cfg.bridge = val.get<bool>();
      else if (key == "out" && !flag_given("--out"))
        opt.out = val.get<std::string>();
      else if (key == "format" && !flag_given("--format"))
        opt.format = val.get<std::string>();
      else if (key == "workers" && !flag_given("--workers"))
        opt.cfg.workers = val.get<int>();
      else if (key == "p" && !flag_given("--p")) {
        opt.p_list.clear();
        if (val.is_array())
          for (const auto& v : val) opt.p_list.push_back(v.get<int>());
        else
          opt.p_list.push_back(val.get<int>());
      } else if (key == "occupation_out" && !flag_given("--occupation-out"))
        opt.occupation_out = val.get<std::string>();
      else
        continue;  // flag wins; key valid but ignored
      sources[key] = "config";
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": invalid value");
    }
  }
}

void validate(Options& opt) {
  const auto& c = opt.cfg;
  if (!(c.T > 0.0)) throw ConfigError("T must be positive");
  if (c.M < 1) throw ConfigError("M must be at least 1");
  if (c.n < 1) throw ConfigError("n must be at least 1");
  if (c.reps < 0) throw ConfigError("reps must be nonnegative");
  if (c.pad < -1) throw ConfigError("pad must be nonnegative");
  if (!(c.offset >= 0.0 && c.offset < 1.0))
    throw ConfigError("offset must lie in [0, 1)");
  if (c.k_max < 1) throw ConfigError("kmax must be at least 1");
  if (c.workers < 0) throw ConfigError("workers must be nonnegative");
  if (c.function_id != "sin2pi" && c.function_id != "one" &&
      c.function_id != "halfind")
    throw ConfigError("function must be one of sin2pi|one|halfind");
  if (opt.format != "csv" && opt.format != "json")
    throw ConfigError("format must be csv or json");
  for (double t : c.t_values) {
    if (!(t > 0.0)) throw ConfigError("t must be positive");
    if (t > c.T) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "t exceeds T (t=%g, T=%g)", t, c.T);
      throw ConfigError(buf);
    }
  }
  for (int p : opt.p_list)
    if (p < 1) throw ConfigError("p must be at least 1");
  if (opt.p_list.empty()) throw ConfigError("p list must not be empty");
  if (opt.out.empty()) opt.out = opt.experiment + "." + opt.format;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

ordered_json cell_to_json(const Cell& cell) {
  if (std::holds_alternative<int64_t>(cell)) return std::get<int64_t>(cell);
  if (std::holds_alternative<double>(cell)) {
    const double v = std::get<double>(cell);
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
  }
  return std::get<std::string>(cell);
}

// --- report assembly per experiment ---------------------------------------

Report make_simulate_report(const Options& opt) {
  const auto& cfg = opt.cfg;
  const int reps = cfg.reps > 0 ? cfg.reps : 1;
  const int pad = mc::resolved_pad(cfg);
  const auto grid = rng::make_grid(cfg.T, cfg.M);
  const flow::IndexInterval domain{1 - pad, cfg.n + pad};

  Report rep;
  rep.columns = {"rep", "k", "i", "t", "x", "mass"};
  int64_t events = 0;
  for (int r = 0; r < reps; ++r) {
    const auto ens = rng::sample_driving(domain.lo, domain.hi, grid,
                                         cfg.master_seed,
                                         static_cast<uint32_t>(r));
    const auto fl = flow::apply_flow_map(ens, domain, flow::Variant::full,
                                         cfg.bridge);
    events += static_cast<int64_t>(fl.events.size());
    for (int k = domain.lo; k <= domain.hi; ++k) {
      const auto& path = fl.path(k);
      const auto& steps = fl.mass_steps[static_cast<size_t>(k - domain.lo)];
      size_t s = 0;
      for (int i = 0; i <= grid.steps; ++i) {
        while (s + 1 < steps.size() && steps[s + 1].grid_index <= i) ++s;
        rep.rows.push_back({static_cast<int64_t>(r), static_cast<int64_t>(k),
                            static_cast<int64_t>(i), grid.time(i), path[i],
                            static_cast<int64_t>(steps[s].mass)});
      }
    }
  }
  rep.summary = {{"reps", static_cast<int64_t>(reps)},
                 {"merge_events", events},
                 {"domain_lo", static_cast<int64_t>(domain.lo)},
                 {"domain_hi", static_cast<int64_t>(domain.hi)}};
  return rep;
}

Report make_occupation_dump(const Options& opt, int reps) {
  const auto& cfg = opt.cfg;
  const int pad = mc::resolved_pad(cfg);
  const auto grid = rng::make_grid(cfg.T, cfg.M);
  const double t_eval = cfg.t_values.empty() ? cfg.T : cfg.t_values.front();
  const flow::IndexInterval domain{1 - pad, cfg.n + pad};
  const auto& fn = occupation::builtin_function(cfg.function_id);

  Report rep;
  rep.columns = {"rep", "k", "A_k"};
  for (int r = 0; r < reps; ++r) {
    const auto ens = rng::sample_driving(domain.lo, domain.hi, grid,
                                         cfg.master_seed,
                                         static_cast<uint32_t>(r));
    const auto fl = flow::apply_flow_map(ens, domain, flow::Variant::full,
                                         cfg.bridge);
    const auto sample =
        occupation::occupation_sample(fl, 1, cfg.n, t_eval, fn, cfg.offset);
    for (int k = 1; k <= cfg.n; ++k)
      rep.rows.push_back(
          {static_cast<int64_t>(r), static_cast<int64_t>(k), sample.value(k)});
  }
  return rep;
}

Report make_clt_report(const Options& opt) {
  const auto res = mc::run_clt(opt.cfg);
  Report rep;
  rep.columns = {"rep", "Y"};
  for (size_t r = 0; r < res.Y.size(); ++r)
    rep.rows.push_back({static_cast<int64_t>(r), res.Y[r]});
  rep.summary = {{"t", res.t_eval},
                 {"mean_A", res.mean_A},
                 {"var_Y", res.var_Y.value},
                 {"var_Y_se", res.var_Y.se},
                 {"sigma_series", res.sigma_value},
                 {"sigma_series_se", res.sigma_se},
                 {"var0", res.var0},
                 {"tail_max_ratio", res.tail_max_ratio},
                 {"ks_statistic", res.ks.statistic},
                 {"ks_p_value", res.ks.p_value},
                 {"ks_applicable", static_cast<int64_t>(res.ks.applicable)},
                 {"skewness", res.skew},
                 {"excess_kurtosis", res.ex_kurtosis}};
  return rep;
}

Report make_moments_report(const Options& opt) {
  const auto res = mc::run_moments(opt.cfg, opt.p_list);
  Report rep;
  rep.columns = {"t", "p", "estimate", "stderr"};
  for (const auto& row : res.rows)
    rep.rows.push_back(
        {row.t, static_cast<int64_t>(row.p), row.estimate, row.se});
  rep.summary = {{"a", res.a}, {"b", res.b}};
  return rep;
}

Report make_smalltime_report(const Options& opt) {
  std::vector<double> ts = opt.cfg.t_values;
  if (ts.empty()) ts = {0.05, 0.02, 0.01};
  const auto res = mc::run_small_time(opt.cfg, ts);
  Report rep;
  rep.columns = {"t", "sigma2_over_t", "stderr"};
  for (const auto& row : res.rows)
    rep.rows.push_back({row.t, row.sigma2_over_t, row.se});
  for (const auto& row : res.rows) {
    char key[64];
    std::snprintf(key, sizeof key, "var0_over_t@%g", row.t);
    rep.summary.emplace_back(key, row.var0_over_t);
    std::snprintf(key, sizeof key, "tail_ratio@%g", row.t);
    rep.summary.emplace_back(key, row.tail_ratio);
  }
  return rep;
}

Report make_mixing_report(const Options& opt) {
  const auto res = mc::run_mixing(opt.cfg);
  Report rep;
  const double nan = std::nan("");
  rep.columns = {"kind", "l", "param", "t", "estimate", "stderr", "oracle"};
  for (const auto& row : res.gap_rows) {
    rep.rows.push_back({std::string("gap_fine"), int64_t{0},
                        static_cast<int64_t>(row.cfg.j), row.cfg.t,
                        row.est_fine, row.se_fine, row.exact});
    rep.rows.push_back({std::string("gap_coarse"), int64_t{0},
                        static_cast<int64_t>(row.cfg.j), row.cfg.t,
                        row.est_coarse, row.se_coarse, row.exact});
  }
  for (const auto& row : res.coupling.rows) {
    char kind[32];
    std::snprintf(kind, sizeof kind, "coupling%cj%d",
                  row.side == coupling::Side::plus ? '+' : '-', row.j);
    double frac = nan, se = nan;
    if (row.occurrences > 0) {
      frac = static_cast<double>(row.agreements) / row.occurrences;
      se = std::sqrt(frac * (1.0 - frac) / row.occurrences);
    }
    rep.rows.push_back({std::string(kind), int64_t{0},
                        static_cast<int64_t>(row.p),
                        std::min(opt.cfg.T, 0.25), frac, se, 1.0});
  }
  const auto& dec = res.decay;
  for (int k = 1; k <= dec.series.k_max; ++k)
    rep.rows.push_back({std::string("cov_decay"), int64_t{0},
                        static_cast<int64_t>(k), dec.t_eval,
                        dec.series.cov[k - 1], dec.series.se[k - 1], nan});
  rep.rows.push_back({std::string("decay_var0"), int64_t{0}, int64_t{0},
                      dec.t_eval, dec.var0, dec.var0_se, nan});
  rep.rows.push_back({std::string("decay_slope"), int64_t{0},
                      static_cast<int64_t>(dec.regression.used_lags),
                      dec.t_eval, dec.regression.slope,
                      dec.regression.slope_se, nan});
  rep.rows.push_back({std::string("decay_upper95"), int64_t{0},
                      static_cast<int64_t>(dec.regression.used_lags),
                      dec.t_eval, dec.regression.upper95, nan, nan});
  rep.summary = {{"coupling_reps", static_cast<int64_t>(res.coupling.reps)},
                 {"coupling_top", static_cast<int64_t>(res.coupling.top)},
                 {"decay_used_lags",
                  static_cast<int64_t>(dec.regression.used_lags)}};
  return rep;
}

}  // namespace

Options parse_config(int argc, const char* const* argv) {
  Options opt;
  CLI::App app{"Coalescing-flow Monte Carlo experiments"};
  app.require_subcommand(1);

  static const std::map<std::string, std::string> kAbout = {
      {"simulate", "one flow realization: particle paths, merges, masses"},
      {"clt", "normalized occupation window sums across replications"},
      {"moments", "occupation integral moments on a time grid"},
      {"mixing", "gap probabilities, one-sided coupling, covariance decay"},
      {"smalltime", "occupation variance ratio at small times"},
  };
  for (const char* name : {"simulate", "clt", "moments", "mixing", "smalltime"}) {
    CLI::App* sub = app.add_subcommand(name, kAbout.at(name));
    sub->add_option("--T", opt.cfg.T, "time horizon");
    sub->add_option("--M", opt.cfg.M, "grid steps");
    sub->add_option("--t", opt.cfg.t_values, "evaluation time(s)");
    sub->add_option("--n", opt.cfg.n, "window width (interval count)");
    sub->add_option("--reps", opt.cfg.reps, "replications (0 = default)");
    sub->add_option("--pad", opt.cfg.pad, "extra particles on each side");
    sub->add_option("--seed", opt.cfg.master_seed, "master seed");
    sub->add_option("--function", opt.cfg.function_id,
                    "test function: sin2pi|one|halfind");
    sub->add_option("--offset", opt.cfg.offset, "interval offset in [0,1)");
    sub->add_option("--kmax", opt.cfg.k_max, "covariance lag cutoff");
    sub->add_flag("--bridge", opt.cfg.bridge, "bridge-sharpened crossings");
    sub->add_option("--out", opt.out, "output path");
    sub->add_option("--format", opt.format, "csv|json");
    sub->add_option("--workers", opt.cfg.workers, "worker threads (0 = auto)");
    sub->add_option("--p", opt.p_list, "moment orders");
    sub->add_option("--occupation-out", opt.occupation_out,
                    "per-replication occupation dump path");
    sub->add_option("--config", opt.config_file, "JSON config file");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  CLI::App* sub = app.get_subcommands().front();
  opt.experiment = sub->get_name();

  std::map<std::string, std::string> sources;
  for (const auto& key : config_keys()) sources[key] = "default";
  if (!opt.config_file.empty())
    apply_config_file(opt.config_file, sub, opt, sources);
  const std::map<std::string, std::string> flag_of = {
      {"T", "--T"}, {"M", "--M"}, {"t", "--t"}, {"n", "--n"},
      {"reps", "--reps"}, {"pad", "--pad"}, {"seed", "--seed"},
      {"function", "--function"}, {"offset", "--offset"}, {"kmax", "--kmax"},
      {"bridge", "--bridge"}, {"out", "--out"}, {"format", "--format"},
      {"workers", "--workers"}, {"p", "--p"},
      {"occupation_out", "--occupation-out"}};
  for (const auto& [key, flag] : flag_of)
    if (sub->count(flag) > 0) sources[key] = "flag";

  if (const char* env = std::getenv("MMAF_SEED"); env && *env) {
    char* end = nullptr;
    const uint64_t v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw ConfigError(std::string("MMAF_SEED: invalid unsigned integer '") +
                        env + "'");
    opt.cfg.master_seed = v;
    sources["seed"] = "env";
  }

  validate(opt);
  opt.provenance.assign(sources.begin(), sources.end());
  return opt;
}

std::string format_cell(const Cell& cell) {
  if (std::holds_alternative<int64_t>(cell)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%" PRId64, std::get<int64_t>(cell));
    return buf;
  }
  if (std::holds_alternative<double>(cell)) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(cell));
    return buf;
  }
  return csv_escape(std::get<std::string>(cell));
}

void write_report(const Report& report, const std::string& path,
                  const std::string& format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (format == "csv") {
    for (size_t c = 0; c < report.columns.size(); ++c) {
      if (c) out << ',';
      out << csv_escape(report.columns[c]);
    }
    out << '\n';
    for (const auto& row : report.rows) {
      for (size_t c = 0; c < row.size(); ++c) {
        if (c) out << ',';
        out << format_cell(row[c]);
      }
      out << '\n';
    }
  } else if (format == "json") {
    ordered_json doc;
    doc["columns"] = report.columns;
    doc["rows"] = ordered_json::array();
    for (const auto& row : report.rows) {
      ordered_json jrow = ordered_json::array();
      for (const auto& cell : row) jrow.push_back(cell_to_json(cell));
      doc["rows"].push_back(std::move(jrow));
    }
    doc["summary"] = ordered_json::object();
    for (const auto& [key, cell] : report.summary)
      doc["summary"][key] = cell_to_json(cell);
    out << doc.dump(2) << '\n';
  } else {
    throw std::runtime_error("unknown report format: " + format);
  }
  out.flush();
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::string config_to_json(const Options& opt) {
  ordered_json doc;
  doc["experiment"] = opt.experiment;
  doc["T"] = opt.cfg.T;
  doc["M"] = opt.cfg.M;
  doc["t"] = opt.cfg.t_values;
  doc["n"] = opt.cfg.n;
  doc["reps"] = opt.cfg.reps;
  doc["pad"] = opt.cfg.pad;
  doc["seed"] = opt.cfg.master_seed;
  doc["function"] = opt.cfg.function_id;
  doc["offset"] = opt.cfg.offset;
  doc["kmax"] = opt.cfg.k_max;
  doc["bridge"] = opt.cfg.bridge;
  doc["out"] = opt.out;
  doc["format"] = opt.format;
  doc["workers"] = opt.cfg.workers;
  doc["p"] = opt.p_list;
  doc["occupation_out"] = opt.occupation_out;
  doc["config_file"] = opt.config_file;
  ordered_json prov = ordered_json::object();
  for (const auto& [key, src] : opt.provenance) prov[key] = src;
  doc["provenance"] = std::move(prov);
  return doc.dump();
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  ordered_json doc;
  doc["experiment"] = manifest.experiment;
  doc["version"] = manifest.version;
  doc["master_seed"] = manifest.master_seed;
  doc["config"] = ordered_json::parse(manifest.config_json);
  doc["outputs"] = manifest.outputs;
  doc["wall_seconds"] = manifest.wall_seconds;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

int run_cli(const Options& opt) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.experiment = opt.experiment;
  manifest.config_json = config_to_json(opt);
  manifest.master_seed = opt.cfg.master_seed;
  try {
    Report report;
    if (opt.experiment == "simulate") {
      report = make_simulate_report(opt);
    } else if (opt.experiment == "clt") {
      report = make_clt_report(opt);
      if (!opt.occupation_out.empty()) {
        const int reps = opt.cfg.reps > 0 ? opt.cfg.reps : 2000;
        write_report(make_occupation_dump(opt, reps), opt.occupation_out,
                     opt.format);
        manifest.outputs.push_back(opt.occupation_out);
      }
    } else if (opt.experiment == "moments") {
      report = make_moments_report(opt);
    } else if (opt.experiment == "mixing") {
      report = make_mixing_report(opt);
    } else if (opt.experiment == "smalltime") {
      report = make_smalltime_report(opt);
    } else {
      throw std::runtime_error("unknown experiment: " + opt.experiment);
    }
    write_report(report, opt.out, opt.format);
    manifest.outputs.push_back(opt.out);
  } catch (const std::exception& e) {
    std::cerr << "experiment " << opt.experiment << " failed: " << e.what()
              << "\n";
    return 1;
  }
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_manifest(manifest, opt.out + ".manifest.json");
  return 0;
}

}  // namespace mmaf::cli
