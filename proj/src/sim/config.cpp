#include "uvsdma/sim/config.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "uvsdma/errors.hpp"

namespace uvsdma::sim {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::int64_t kMaxCount = 1000000000;  // trials, samples, symbols
constexpr int kMaxSectors = 4096;
constexpr int kMaxLength = 1000000;
constexpr int kMaxCells = 20000;  // estimation table cells

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

/// Object wrapper that records which keys were consumed and rejects the
/// rest, so misspelled or stale keys never pass silently.
class ObjectReader {
 public:
  ObjectReader(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "must be a JSON object");
  }

  const Json& require(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end()) fail(path_, "missing required key \"" + key + "\"");
    return *it;
  }

  const Json* optional(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (seen_.find(it.key()) == seen_.end()) fail(path_, "unknown key \"" + it.key() + "\"");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string item(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

double get_double(const Json& node, const std::string& path) {
  if (!node.is_number()) fail(path, "must be a number");
  const double value = node.get<double>();
  if (!std::isfinite(value)) fail(path, "must be finite");
  return value;
}

double get_nonnegative(const Json& node, const std::string& path) {
  const double value = get_double(node, path);
  if (value < 0.0) fail(path, "must be >= 0");
  return value;
}

std::int64_t get_integer(const Json& node, const std::string& path, std::int64_t lo,
                         std::int64_t hi) {
  if (node.is_number_unsigned()) {
    const std::uint64_t raw = node.get<std::uint64_t>();
    if (raw > static_cast<std::uint64_t>(hi)) {
      fail(path, "must be <= " + std::to_string(hi));
    }
    const auto value = static_cast<std::int64_t>(raw);
    if (value < lo) fail(path, "must be >= " + std::to_string(lo));
    return value;
  }
  if (node.is_number_integer()) {
    const std::int64_t value = node.get<std::int64_t>();
    if (value < lo) fail(path, "must be >= " + std::to_string(lo));
    if (value > hi) fail(path, "must be <= " + std::to_string(hi));
    return value;
  }
  fail(path, "must be an integer");
}

std::uint64_t get_seed(const Json& node, const std::string& path) {
  if (!node.is_number_unsigned()) fail(path, "must be a non-negative integer");
  return node.get<std::uint64_t>();
}

bool get_bool(const Json& node, const std::string& path) {
  if (!node.is_boolean()) fail(path, "must be true or false");
  return node.get<bool>();
}

std::string get_string(const Json& node, const std::string& path) {
  if (!node.is_string()) fail(path, "must be a string");
  return node.get<std::string>();
}

std::vector<double> get_double_array(const Json& node, const std::string& path,
                                     std::size_t min_size, bool nonnegative) {
  if (!node.is_array()) fail(path, "must be an array of numbers");
  if (node.size() < min_size) {
    fail(path, "must have at least " + std::to_string(min_size) + " entries");
  }
  if (node.size() > static_cast<std::size_t>(kMaxSectors)) fail(path, "too many entries");
  std::vector<double> out;
  out.reserve(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) {
    out.push_back(nonnegative ? get_nonnegative(node[i], item(path, i))
                              : get_double(node[i], item(path, i)));
  }
  return out;
}

/// A per-sector quantity written either as one number (broadcast) or as an
/// array of exactly `sectors` numbers.
std::vector<double> get_broadcast(const Json& node, const std::string& path, int sectors) {
  if (node.is_number()) {
    return std::vector<double>(static_cast<std::size_t>(sectors), get_nonnegative(node, path));
  }
  std::vector<double> values = get_double_array(node, path, 1, true);
  if (values.size() != static_cast<std::size_t>(sectors)) {
    fail(path, "must be one number or an array of " + std::to_string(sectors) + " entries");
  }
  return values;
}

std::string validated_name(const Json& node, const std::string& path) {
  const std::string name = get_string(node, path);
  if (name.empty() || name.size() > 64) fail(path, "must be 1 to 64 characters");
  if (!std::isalnum(static_cast<unsigned char>(name.front()))) {
    fail(path, "must start with a letter or digit");
  }
  for (const char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') {
      fail(path, "may contain only letters, digits, '_', '-' and '.'");
    }
  }
  return name;
}

std::vector<WeightPattern> all_patterns(int users) {
  std::vector<WeightPattern> out;
  for (int size = 1; size <= users; ++size) {
    std::vector<int> combo(static_cast<std::size_t>(size));
    std::iota(combo.begin(), combo.end(), 1);
    while (true) {
      out.push_back(make_pattern(combo, users));
      int i = size - 1;
      while (i >= 0 && combo[static_cast<std::size_t>(i)] == users - (size - 1 - i)) --i;
      if (i < 0) break;
      ++combo[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < size; ++j) {
        combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
  }
  return out;
}

std::vector<WeightPattern> parse_patterns(const Json& node, const std::string& path, int users) {
  std::vector<WeightPattern> out;
  if (node.is_string()) {
    if (node.get<std::string>() != "all") fail(path, "must be \"all\" or an array of patterns");
    return all_patterns(users);
  }
  if (!node.is_array() || node.empty()) {
    fail(path, "must be \"all\" or a non-empty array of weight arrays");
  }
  std::set<std::vector<int>> distinct;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string entry_path = item(path, i);
    const Json& entry = node[i];
    if (!entry.is_array() || entry.empty()) fail(entry_path, "must be a non-empty array of weights");
    std::vector<int> weights;
    weights.reserve(entry.size());
    for (std::size_t j = 0; j < entry.size(); ++j) {
      weights.push_back(static_cast<int>(get_integer(entry[j], item(entry_path, j), 1, users)));
    }
    WeightPattern pattern;
    try {
      pattern = make_pattern(weights, users);
    } catch (const ContractError& error) {
      fail(entry_path, error.what());
    }
    if (!distinct.insert(pattern.weights).second) fail(entry_path, "duplicate pattern");
    out.push_back(std::move(pattern));
  }
  return out;
}

InterferenceScenario parse_scenario(const Json& node, const std::string& path) {
  ObjectReader reader(node, path);
  const Json& desired = reader.require("desired");
  const Json& interferers = reader.require("interferers");
  const Json& noise = reader.require("noise");
  reader.finish();

  if (!interferers.is_array()) fail(path + ".interferers", "must be an array");
  if (interferers.size() > 12) {
    fail(path + ".interferers", "at most 12 interferers are supported");
  }

  const bool scalar_form = desired.is_number();
  InterferenceScenario scenario;
  if (scalar_form) {
    scenario.desired = {get_nonnegative(desired, path + ".desired")};
    for (std::size_t i = 0; i < interferers.size(); ++i) {
      scenario.interferers.push_back(
          {get_nonnegative(interferers[i], item(path + ".interferers", i))});
    }
    if (!noise.is_number()) {
      fail(path, "scalar \"desired\" requires scalar \"noise\" and scalar interferer entries");
    }
    scenario.noise = {get_nonnegative(noise, path + ".noise")};
  } else {
    scenario.desired = get_double_array(desired, path + ".desired", 1, true);
    const std::size_t sectors = scenario.desired.size();
    for (std::size_t i = 0; i < interferers.size(); ++i) {
      const std::string entry_path = item(path + ".interferers", i);
      std::vector<double> gains = get_double_array(interferers[i], entry_path, 1, true);
      if (gains.size() != sectors) {
        fail(entry_path, "must have the same length as \"desired\"");
      }
      scenario.interferers.push_back(std::move(gains));
    }
    std::vector<double> noise_values = get_double_array(noise, path + ".noise", 1, true);
    if (noise_values.size() != sectors) {
      fail(path + ".noise", "must have the same length as \"desired\"");
    }
    scenario.noise = std::move(noise_values);
  }

  try {
    validate_scenario(scenario);
  } catch (const std::exception& error) {
    fail(path, error.what());
  }
  return scenario;
}

std::vector<InterferenceScenario> parse_scenarios(const Json& node, const std::string& path) {
  if (!node.is_array() || node.empty()) fail(path, "must be a non-empty array of scenarios");
  if (node.size() > 64) fail(path, "at most 64 scenarios are supported");
  std::vector<InterferenceScenario> out;
  out.reserve(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) {
    out.push_back(parse_scenario(node[i], item(path, i)));
  }
  return out;
}

Json scenario_echo(const InterferenceScenario& scenario) {
  Json out;
  out["desired"] = scenario.desired;
  out["interferers"] = scenario.interferers;
  out["noise"] = scenario.noise;
  return out;
}

Json scenarios_echo(const std::vector<InterferenceScenario>& scenarios) {
  Json out = Json::array();
  for (const InterferenceScenario& scenario : scenarios) out.push_back(scenario_echo(scenario));
  return out;
}

GaussfitConfig parse_gaussfit(ObjectReader& reader, Json& echo) {
  GaussfitConfig config;
  const std::string& path = reader.path();
  config.intensity = get_double_array(reader.require("intensity"), path + ".intensity", 1, true);
  for (std::size_t m = 0; m < config.intensity.size(); ++m) {
    if (!(config.intensity[m] > 0.0)) fail(item(path + ".intensity", m), "must be > 0");
  }
  const Json& sets = reader.require("weight_sets");
  if (!sets.is_array() || sets.empty()) {
    fail(path + ".weight_sets", "must be a non-empty array of weight arrays");
  }
  if (sets.size() > 64) fail(path + ".weight_sets", "at most 64 weight sets are supported");
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const std::string entry_path = item(path + ".weight_sets", i);
    std::vector<double> weights = get_double_array(sets[i], entry_path, 1, false);
    if (weights.size() != config.intensity.size()) {
      fail(entry_path, "must have the same length as \"intensity\"");
    }
    bool any = false;
    for (const double w : weights) any = any || w != 0.0;
    if (!any) fail(entry_path, "weights must not all be zero");
    config.weight_sets.push_back(std::move(weights));
  }
  config.samples = get_integer(reader.require("samples"), path + ".samples", 1, kMaxCount);
  if (const Json* bins = reader.optional("histogram_bins")) {
    config.histogram_bins =
        static_cast<int>(get_integer(*bins, path + ".histogram_bins", 2, 100000));
  }
  echo["intensity"] = config.intensity;
  echo["weight_sets"] = config.weight_sets;
  echo["samples"] = config.samples;
  echo["histogram_bins"] = config.histogram_bins;
  return config;
}

EstimateConfig parse_estimate(ObjectReader& reader, Json& echo) {
  EstimateConfig config;
  const std::string& path = reader.path();
  const Json& stacks = reader.require("stacks");
  if (!stacks.is_array() || stacks.empty()) {
    fail(path + ".stacks", "must be a non-empty array of per-sector gain arrays");
  }
  if (stacks.size() > 64) fail(path + ".stacks", "at most 64 sector stacks are supported");
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    const std::string entry_path = item(path + ".stacks", i);
    std::vector<double> gains = get_double_array(stacks[i], entry_path, 1, true);
    if (!config.stacks.empty() && gains.size() != config.stacks.front().size()) {
      fail(entry_path, "all stacks must list the same number of users");
    }
    if (std::accumulate(gains.begin(), gains.end(), 0.0) <= 0.0) {
      fail(entry_path, "gains must not all be zero");
    }
    config.stacks.push_back(std::move(gains));
  }
  const int users = static_cast<int>(config.stacks.front().size());
  if (users > 20) fail(path + ".stacks", "at most 20 users are supported");

  config.noise = get_broadcast(reader.require("noise"), path + ".noise",
                               static_cast<int>(config.stacks.size()));
  config.patterns = parse_patterns(reader.require("patterns"), path + ".patterns", users);
  const Json& lengths = reader.require("lengths");
  if (!lengths.is_array() || lengths.empty()) {
    fail(path + ".lengths", "must be a non-empty array of integers");
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    config.lengths.push_back(
        static_cast<int>(get_integer(lengths[i], item(path + ".lengths", i), 1, kMaxLength)));
  }
  config.trials = get_integer(reader.require("trials"), path + ".trials", 1, kMaxCount);
  if (const Json* clip = reader.optional("clip_negative")) {
    config.clip_negative = get_bool(*clip, path + ".clip_negative");
  }

  const std::size_t cells = config.stacks.size() * config.patterns.size() * config.lengths.size();
  if (cells > kMaxCells) {
    fail(path, "stacks x patterns x lengths = " + std::to_string(cells) +
                   " cells exceeds the limit of " + std::to_string(kMaxCells));
  }

  if (const Json* detection = reader.optional("detection")) {
    ObjectReader sub(*detection, path + ".detection");
    const Json& users_node = sub.require("users");
    if (!users_node.is_array() || users_node.size() != 2) {
      fail(path + ".detection.users", "must be an array of exactly two user indices");
    }
    DetectionSubConfig pair;
    pair.user_a =
        static_cast<int>(get_integer(users_node[0], path + ".detection.users[0]", 1, users)) - 1;
    pair.user_b =
        static_cast<int>(get_integer(users_node[1], path + ".detection.users[1]", 1, users)) - 1;
    if (pair.user_a == pair.user_b) fail(path + ".detection.users", "users must be distinct");
    pair.symbols =
        get_integer(sub.require("symbols"), path + ".detection.symbols", 1, kMaxCount);
    sub.finish();
    config.detection = pair;
  }

  echo["stacks"] = config.stacks;
  echo["noise"] = config.noise;
  Json patterns_echo = Json::array();
  for (const WeightPattern& pattern : config.patterns) patterns_echo.push_back(pattern.weights);
  echo["patterns"] = patterns_echo;
  echo["lengths"] = config.lengths;
  echo["trials"] = config.trials;
  echo["clip_negative"] = config.clip_negative;
  if (config.detection) {
    Json detection;
    detection["users"] = {config.detection->user_a + 1, config.detection->user_b + 1};
    detection["symbols"] = config.detection->symbols;
    echo["detection"] = detection;
  }
  return config;
}

Detect2Config parse_detect2(ObjectReader& reader, Json& echo) {
  Detect2Config config;
  const std::string& path = reader.path();
  config.gains_a = get_double_array(reader.require("gains_a"), path + ".gains_a", 1, true);
  config.gains_b = get_double_array(reader.require("gains_b"), path + ".gains_b", 1, true);
  if (config.gains_b.size() != config.gains_a.size()) {
    fail(path + ".gains_b", "must have the same length as \"gains_a\"");
  }
  config.noise = get_broadcast(reader.require("noise"), path + ".noise",
                               static_cast<int>(config.gains_a.size()));
  for (std::size_t m = 0; m < config.gains_a.size(); ++m) {
    if (!(config.gains_a[m] + config.noise[m] > 0.0) ||
        !(config.gains_b[m] + config.noise[m] > 0.0)) {
      fail(item(path + ".noise", m), "total intensity must be > 0 under both hypotheses");
    }
  }
  config.symbols = get_integer(reader.require("symbols"), path + ".symbols", 1, kMaxCount);
  echo["gains_a"] = config.gains_a;
  echo["gains_b"] = config.gains_b;
  echo["noise"] = config.noise;
  echo["symbols"] = config.symbols;
  return config;
}

MultiuserConfig parse_multiuser(ObjectReader& reader, Json& echo) {
  MultiuserConfig config;
  const std::string& path = reader.path();
  config.scenarios = parse_scenarios(reader.require("scenarios"), path + ".scenarios");
  config.symbols = get_integer(reader.require("symbols"), path + ".symbols", 1, kMaxCount);
  if (const Json* order = reader.optional("probe_order")) {
    const std::string text = get_string(*order, path + ".probe_order");
    if (text == "ascending") {
      config.probe_order = ProbeOrder::Ascending;
    } else if (text == "descending") {
      config.probe_order = ProbeOrder::Descending;
    } else {
      fail(path + ".probe_order", "must be \"ascending\" or \"descending\"");
    }
  }
  echo["scenarios"] = scenarios_echo(config.scenarios);
  echo["symbols"] = config.symbols;
  echo["probe_order"] =
      config.probe_order == ProbeOrder::Ascending ? "ascending" : "descending";
  return config;
}

TimingConfig parse_timing(ObjectReader& reader, Json& echo) {
  TimingConfig config;
  const std::string& path = reader.path();
  config.scenarios = parse_scenarios(reader.require("scenarios"), path + ".scenarios");
  config.symbols = get_integer(reader.require("symbols"), path + ".symbols", 1, kMaxCount);
  config.repetitions =
      static_cast<int>(get_integer(reader.require("repetitions"), path + ".repetitions", 10, 10000));
  if (const Json* warmup = reader.optional("warmup")) {
    config.warmup = static_cast<int>(get_integer(*warmup, path + ".warmup", 0, 1000));
  }
  echo["scenarios"] = scenarios_echo(config.scenarios);
  echo["symbols"] = config.symbols;
  echo["repetitions"] = config.repetitions;
  echo["warmup"] = config.warmup;
  return config;
}

PilotSearchConfig parse_pilot_search(ObjectReader& reader, Json& echo) {
  PilotSearchConfig config;
  const std::string& path = reader.path();
  config.users = static_cast<int>(get_integer(reader.require("users"), path + ".users", 1, 20));
  config.length =
      static_cast<int>(get_integer(reader.require("length"), path + ".length", 1, kMaxLength));
  const Json* sums = reader.optional("sector_sums");
  const Json* stacks = reader.optional("stacks");
  if ((sums == nullptr) == (stacks == nullptr)) {
    fail(path, "exactly one of \"sector_sums\" and \"stacks\" is required");
  }
  if (sums != nullptr) {
    config.sector_sums = get_double_array(*sums, path + ".sector_sums", 1, true);
  } else {
    if (!stacks->is_array() || stacks->empty()) {
      fail(path + ".stacks", "must be a non-empty array of per-sector gain arrays");
    }
    for (std::size_t i = 0; i < stacks->size(); ++i) {
      const std::string entry_path = item(path + ".stacks", i);
      std::vector<double> gains = get_double_array((*stacks)[i], entry_path, 1, true);
      if (gains.size() != static_cast<std::size_t>(config.users)) {
        fail(entry_path, "must list exactly " + std::to_string(config.users) + " user gains");
      }
      config.sector_sums.push_back(std::accumulate(gains.begin(), gains.end(), 0.0));
      config.stacks.push_back(std::move(gains));
    }
  }
  config.noise = get_broadcast(reader.require("noise"), path + ".noise",
                               static_cast<int>(config.sector_sums.size()));
  echo["users"] = config.users;
  echo["length"] = config.length;
  if (!config.stacks.empty()) echo["stacks"] = config.stacks;
  echo["sector_sums"] = config.sector_sums;
  echo["noise"] = config.noise;
  return config;
}

}  // namespace

ExperimentConfig parse_config_string(const std::string& text) {
  Json document;
  try {
    document = Json::parse(text);
  } catch (const nlohmann::json::parse_error& error) {
    throw ConfigError(std::string("config parse error: ") + error.what());
  }

  ObjectReader reader(document, "config");
  const std::int64_t schema_version =
      get_integer(reader.require("schema_version"), "config.schema_version", 1, 1);
  const std::string kind = get_string(reader.require("kind"), "config.kind");
  ExperimentConfig config;
  config.kind = kind;
  config.name = validated_name(reader.require("name"), "config.name");
  config.seed = get_seed(reader.require("seed"), "config.seed");

  Json echo;
  echo["schema_version"] = schema_version;
  echo["kind"] = kind;
  echo["name"] = config.name;
  echo["seed"] = config.seed;

  if (kind == "gaussfit") {
    config.payload = parse_gaussfit(reader, echo);
  } else if (kind == "estimate") {
    config.payload = parse_estimate(reader, echo);
  } else if (kind == "detect2") {
    config.payload = parse_detect2(reader, echo);
  } else if (kind == "multiuser") {
    config.payload = parse_multiuser(reader, echo);
  } else if (kind == "timing") {
    config.payload = parse_timing(reader, echo);
  } else if (kind == "pilot-search") {
    config.payload = parse_pilot_search(reader, echo);
  } else {
    fail("config.kind",
         "must be one of gaussfit, estimate, pilot-search, detect2, multiuser, timing");
  }
  reader.finish();
  config.echo = std::move(echo);
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw ConfigError("cannot read config file \"" + path + "\"");
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  if (stream.bad()) throw ConfigError("cannot read config file \"" + path + "\"");
  try {
    return parse_config_string(buffer.str());
  } catch (const ConfigError& error) {
    throw ConfigError(path + ": " + error.what());
  }
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.echo["seed"] = seed;
}

}  // namespace uvsdma::sim
