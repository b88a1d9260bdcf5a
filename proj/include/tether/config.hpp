#pragma once

// Plain-text key = value experiment configs. Keys carry their unit in the
// name; unknown keys are rejected and missing keys keep the SimConfig
// defaults.

#include <iosfwd>
#include <string>
#include <vector>

#include "tether/sim.hpp"

namespace tether {

struct ExperimentConfig {
  SimConfig sim;
  std::string trace_csv = "trace.csv";
  std::string metrics_csv = "metrics.csv";
};

struct ConfigKey {
  std::string name;
  std::string description;
};

/// All accepted keys in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Apply one key = value pair. Throws ConfigError on an unknown key or a
/// malformed value.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Numeric keys only; used by sweep axes.
void apply_numeric_setting(SimConfig& cfg, const std::string& key, double value);

/// Parse a whole config. '#' starts a comment; blank lines are ignored.
/// Errors carry "<source>:<line>: ".
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// "key=v1,v2,..." or "key=start:stop:count" (inclusive linspace).
SweepAxis parse_grid_axis(const std::string& spec);

/// Parses "key=value" for --set.
std::pair<std::string, std::string> split_assignment(const std::string& text);

}  // namespace tether
