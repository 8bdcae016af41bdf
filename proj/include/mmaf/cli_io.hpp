#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mmaf/mc_engine.hpp"

namespace mmaf::cli {

inline constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown by parse_config when --help is requested; carries the help text.
struct HelpRequested {
  std::string text;
};

struct Options {
  std::string experiment;  // simulate | clt | moments | mixing | smalltime
  mc::ExperimentConfig cfg;
  std::vector<int> p_list = {2, 4};
  std::string out;              // default "<experiment>.<format>"
  std::string format = "csv";   // csv | json
  std::string occupation_out;   // optional per-rep occupation dump (clt)
  std::string config_file;
  // key -> default | config | flag | env, for the manifest
  std::vector<std::pair<std::string, std::string>> provenance;
};

// Parses argv (subcommand + flags), merging an optional JSON --config file.
// Precedence: defaults < config file < command-line flags < MMAF_SEED env var.
// Unknown config keys and invalid values raise ConfigError naming the key.
Options parse_config(int argc, const char* const* argv);

// Tabular report with typed cells; doubles are always written with 17
// significant digits so a rerun reproduces the file byte for byte.
using Cell = std::variant<int64_t, double, std::string>;

struct Report {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, Cell>> summary;  // json output only
};

std::string format_cell(const Cell& cell);
void write_report(const Report& report, const std::string& path,
                  const std::string& format);

// Run metadata written next to every report (<out>.manifest.json).
struct RunManifest {
  std::string experiment;
  std::string config_json;
  uint64_t master_seed = 0;
  std::string version = kVersion;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
};

void write_manifest(const RunManifest& manifest, const std::string& path);
std::string config_to_json(const Options& opt);

// Executes the selected experiment and writes report + manifest.
// Returns the process exit code (0 = success).
int run_cli(const Options& opt);

}  // namespace mmaf::cli
