#pragma once

// Named end-to-end runs and module subcommands driven by a RunConfig. Each run
// writes CSV files into an output directory plus a JSON result record.

#include <map>
#include <string>
#include <vector>

#include "beamlab/config.hpp"
#include "beamlab/errors.hpp"

namespace beamlab {

// Unknown scenario or subcommand; the message lists the valid names.
class UsageError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

struct ScenarioResult {
    std::string name;
    bool pass = true;
    std::vector<std::string> failures;  // one line per violated threshold
    std::map<std::string, double> metrics;
    std::vector<std::string> files;
};

const std::vector<std::string>& scenario_names();
// "module subcommand" pairs, e.g. "cyl dn".
const std::vector<std::string>& command_names();
std::string usage_text();

ScenarioResult run_scenario(const std::string& name, const RunConfig& cfg, const std::string& out_dir);
// Subcommands compute and write the same data without pass/fail thresholds.
ScenarioResult run_command(const std::string& module, const std::string& sub, const RunConfig& cfg,
                           const std::string& out_dir);

// Writes <out_dir>/<name>.result.json.
std::string write_result_record(const ScenarioResult& r, const std::string& out_dir);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace beamlab
