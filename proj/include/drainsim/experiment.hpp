#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "drainsim/sim.hpp"

namespace drainsim::experiment {

/// One experiment: a base configuration, an optional single-parameter sweep,
/// and the strategies to run at each sweep point.
struct ExperimentSpec {
  sim::ScenarioConfig base;
  std::string sweep_parameter;  // empty -> single point
  std::vector<double> sweep_values;
  std::vector<sim::Strategy> strategies;
  std::string output_dir = "out";
};

struct Diagnostic {
  bool error = false;  // false -> warning
  std::string field;
  std::string message;
};

/// Thrown on malformed spec text; `field` names the offending key.
struct SpecError : std::runtime_error {
  std::string field;
  SpecError(std::string f, const std::string& msg)
      : std::runtime_error(f.empty() ? msg : f + ": " + msg),
        field(std::move(f)) {}
};

/// Sweepable numeric parameters of ScenarioConfig.
std::vector<std::string> sweepable_parameters();

/// Parse the JSON spec text. Unknown keys and type mismatches throw SpecError.
ExperimentSpec parse_spec(const std::string& json_text);

ExperimentSpec load_spec_file(const std::string& path);

/// Schema and range checks; errors make run() refuse, warnings do not.
std::vector<Diagnostic> validate_spec(const ExperimentSpec& spec);

/// Base config with the sweep parameter set to `value`.
sim::ScenarioConfig apply_sweep(const ExperimentSpec& spec, double value);

struct RunOptions {
  bool override_seed = false;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output_dir;  // empty -> spec's directory
};

/// Per-receiver raw rows, one line per (trial, receiver). Deterministic.
std::string trial_csv(const std::vector<sim::TrialResult>& trials);

std::string summary_csv_header();
std::string summary_csv_row(const std::string& parameter, double value,
                            sim::Strategy strategy,
                            const sim::MetricsReport& rep);

/// Run every (strategy, sweep value) pair, writing one raw CSV each plus a
/// summary CSV and a manifest into the output directory.
/// Returns 0 on success, 1 on a runtime failure (diagnostic on `log`).
int run_experiment(const ExperimentSpec& spec, const RunOptions& opts,
                   std::ostream& log);

}  // namespace drainsim::experiment
