#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfg/model.hpp"

namespace mfg {

/// Raised for anything wrong with a config file: missing key, bad value,
/// violated model invariant. Mapped to exit code 2 by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParsedConfig {
  ProblemSpec spec;
  SolverSettings settings;
  std::map<std::string, std::string> keys;  // canonical key -> value text
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config(const std::string& path);

/// Canonical emission: one key=value per line, keys sorted. Reparsing it
/// reproduces the same hash.
std::string canonical_config(const ParsedConfig& cfg);

/// FNV-1a over the canonical emission.
std::uint64_t config_hash(const ParsedConfig& cfg);

struct RunManifest {
  std::string subcommand;
  std::uint64_t config_hash = 0;
  int seed = 0;
  double wall_seconds = 0;
  std::vector<std::string> outputs;
  std::map<std::string, bool> invariants;
};

void write_manifest(const std::string& path, const RunManifest& m);

struct InvariantRow {
  std::string name;
  bool pass = false;
  double measured = 0;
  double tolerance = 0;
};

struct InvariantReport {
  std::vector<InvariantRow> rows;
  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }
};

/// Post-hoc audit of a finished run directory: mass columns of every cloud
/// CSV, finiteness of every numeric field, monotone fixed-point residuals.
InvariantReport check_invariants(const std::string& run_dir);

void write_invariant_report(const std::string& path, const InvariantReport& rep);

}  // namespace mfg
