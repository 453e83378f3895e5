#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "uvsdma/multiuser.hpp"
#include "uvsdma/pilot.hpp"

namespace uvsdma::sim {

/// Downstream detection stage attached to an estimation run: the two listed
/// users form a one-of-two selection problem per sector stack, detected once
/// with estimated gains and once with the true gains.
struct DetectionSubConfig {
  int user_a = 0;  // 0-based after parsing (config lists 1-based)
  int user_b = 1;
  std::int64_t symbols = 0;  // detection symbols per table cell
};

struct GaussfitConfig {
  std::vector<double> intensity;                 // per-sector mean counts
  std::vector<std::vector<double>> weight_sets;  // raw weights, normalized at run time
  std::int64_t samples = 0;
  int histogram_bins = 61;
};

struct EstimateConfig {
  std::vector<std::vector<double>> stacks;  // per-sector user gain vectors
  std::vector<double> noise;                // per-sector noise means
  std::vector<WeightPattern> patterns;
  std::vector<int> lengths;
  std::int64_t trials = 0;
  bool clip_negative = false;
  std::optional<DetectionSubConfig> detection;
};

struct Detect2Config {
  std::vector<double> gains_a;
  std::vector<double> gains_b;
  std::vector<double> noise;
  std::int64_t symbols = 0;
};

struct MultiuserConfig {
  std::vector<InterferenceScenario> scenarios;
  std::int64_t symbols = 0;
  ProbeOrder probe_order = ProbeOrder::Ascending;
};

struct TimingConfig {
  std::vector<InterferenceScenario> scenarios;
  std::int64_t symbols = 0;
  int repetitions = 0;  // timed repetitions, at least 10
  int warmup = 2;       // untimed leading repetitions
};

struct PilotSearchConfig {
  int users = 0;
  int length = 0;
  std::vector<double> noise;        // per sector
  std::vector<double> sector_sums;  // total user gain per sector
  std::vector<std::vector<double>> stacks;  // optional source of sector_sums
};

/// Parsed, validated and resolved experiment configuration. `echo` is the
/// canonical resolved form (defaults materialized, scalars broadcast,
/// pattern lists expanded) that reports embed verbatim.
struct ExperimentConfig {
  std::string kind;
  std::string name;
  std::uint64_t seed = 0;
  nlohmann::ordered_json echo;
  std::variant<GaussfitConfig, EstimateConfig, Detect2Config, MultiuserConfig, TimingConfig,
               PilotSearchConfig>
      payload;
};

/// Parses a config document. Fail-closed: unknown keys, wrong types,
/// out-of-range values, inconsistent shapes and bad scenario values all
/// throw ConfigError naming the offending field.
ExperimentConfig parse_config_string(const std::string& text);

/// Reads and parses a config file; unreadable files throw ConfigError.
ExperimentConfig parse_config_file(const std::string& path);

/// Replaces the seed (command-line override), keeping the echo in sync.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace uvsdma::sim
