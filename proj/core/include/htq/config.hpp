#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "htq/diffusion.hpp"
#include "htq/distributions.hpp"
#include "htq/harness.hpp"
#include "htq/regulator.hpp"

namespace htq {

struct LimitSection {
  /// Explicit limit parameters; derived from the system section when absent.
  std::optional<DiffusionSpec> diffusion;
  double grid_cap = 8.0;
  std::size_t points = 4096;
};

struct DrainSection {
  std::vector<double> x;
  double b = -1.0;
  double delta = 1.0;
};

struct RegulatorSection {
  /// CSV path file with columns time,value; relative to the config file.
  std::filesystem::path path;
  Interpolation interpolation = Interpolation::Linear;
  HazardFunction hazard = HazardFunction::constant(0.0);
  double dt = 1e-3;
  std::optional<DrainSection> drain;
};

/// One configuration file fully determines an experiment.
struct ExperimentConfig {
  std::optional<ExperimentPlan> plan;
  /// System index used by `simulate`; defaults to the last n of the sequence.
  std::optional<int> simulate_n;
  LimitSection limit;
  std::optional<RegulatorSection> regulator;
};

/// Parses a YAML document. Unknown keys and malformed values throw Error
/// naming the offending key. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& file);

/// Tagged records such as {kind: erlang, shape: 2, rate: 2}.
DistributionSpec parse_distribution(const std::string& text);
/// Tagged records such as {form: linear, slope: 1, growth: {K: 1, l: 1}}.
HazardFunction parse_hazard(const std::string& text);

}  // namespace htq
