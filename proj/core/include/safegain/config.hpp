#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "safegain/certify.hpp"
#include "safegain/filters.hpp"
#include "safegain/scenarios.hpp"
#include "safegain/sim.hpp"

namespace safegain {

enum class Stage { Classify, Certify, Sweep, Envelope, Cost };

struct OutputSelection {
  std::string dir = "out";
  bool report = true;
  bool sweep_csv = true;
  bool trajectories = false;
  bool cert = true;
};

// A fully resolved run: scenario, filter, sweep protocol, expectations.
struct RunConfig {
  int schema = 1;
  Scenario scenario;
  FilterSpec filter;
  std::vector<double> sigmas;
  std::vector<Vec> x0_set;
  DisturbanceSignal disturbance;
  double dt = 1e-3;
  double horizon = 20.0;
  std::uint64_t seed = kDefaultSeed;
  int certify_n = 200;
  std::vector<std::string> certify_checks;  // subset of the known checks
  std::vector<double> envelope_amplitudes;
  double envelope_sigma = 1.0;
  std::vector<Stage> stages;
  // [lo, hi]; hi empty means "extends to the top of the sigma grid".
  std::optional<std::pair<double, std::optional<double>>> expected_margin;
  OutputSelection outputs;
};

struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  bool certify_only = false;  // restrict stages to classify + certify
};

// Parses and validates a JSON config. Unknown fields and malformed values
// raise ConfigError naming the offending field.
RunConfig load_config(const std::string& path);

// Registry listing for the `list` command.
std::string list_scenarios_text();

// Executes the configured stages, writes artifacts under the output
// directory, and returns the process exit status (0 on success, 1 when a
// requested certification fails or a declared expectation is missed).
int run_scenario(const std::string& config_path,
                 const CliOverrides& overrides = {});

// Exit status derived from report.json content alone.
int exit_status_from_report(const std::string& report_json);

// One-line verdict summary derived from report.json content alone.
std::string verdict_summary(const std::string& report_json);

}  // namespace safegain
