#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ftteleop/closed_loop_sim.hpp"

namespace ftteleop {

/// All problems found while loading a scenario, not just the first one.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct ScenarioConfig {
  std::string name;
  Scenario scenario;
  double sample_interval = 1e-3;  // seconds between recorded samples
  std::string trace_path;         // relative to the output directory
  std::string audit_path;
};

/// Parses the scenario text format:
///
///   # comment
///   [section]
///   key = value          # scalars, comma-separated lists, or words
///
/// Sections: local, remote, controller, initial, force.local, force.remote, sim,
/// output. Scalar gains broadcast to every joint. See configs/ for complete files.
ScenarioConfig parse_scenario(const std::string& text, const std::string& name = "scenario");

/// Reads and parses a file. Throws std::runtime_error if it cannot be opened.
ScenarioConfig load_scenario(const std::string& path);

/// Emits text that parse_scenario reads back to an equivalent configuration.
std::string serialize_scenario(const ScenarioConfig& config);

/// Changes the step size keeping the recording interval.
void set_time_step(ScenarioConfig& config, double dt);

}  // namespace ftteleop
