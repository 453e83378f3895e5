#include "uvsdma/multiuser.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "poisson_lattice.hpp"
#include "uvsdma/errors.hpp"
#include "uvsdma/two_user.hpp"

namespace uvsdma {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kMaxInterferers = 16;
constexpr int kMaxTableInterferers = 12;
constexpr std::size_t kMaxSerializedEntries = 4096;

}  // namespace

void validate_scenario(const InterferenceScenario& scenario) {
  const std::size_t sectors = scenario.desired.size();
  if (sectors == 0) throw ContractError("scenario: desired gains must be non-empty");
  for (double g : scenario.desired)
    if (!std::isfinite(g) || g < 0.0)
      throw ContractError("scenario: desired gains must be finite and non-negative");
  if (scenario.interferers.size() > kMaxInterferers)
    throw UnsupportedError("scenario: more than 16 interferers is unsupported");
  for (const auto& row : scenario.interferers) {
    if (row.size() != sectors)
      throw ContractError("scenario: every interferer needs one gain per sector");
    for (double g : row)
      if (!std::isfinite(g) || g < 0.0)
        throw ContractError("scenario: interferer gains must be finite and non-negative");
  }
  if (scenario.noise.size() != sectors)
    throw ContractError("scenario: noise needs one entry per sector");
  for (double n : scenario.noise)
    if (!std::isfinite(n) || n <= 0.0)
      throw ContractError("scenario: noise means must be finite and strictly positive");
}

std::vector<std::vector<double>> enumerate_modes(const InterferenceScenario& scenario) {
  validate_scenario(scenario);
  const std::size_t sectors = scenario.desired.size();
  const int count = static_cast<int>(scenario.interferers.size());
  std::vector<std::vector<double>> modes(static_cast<std::size_t>(1) << count,
                                         std::vector<double>(sectors, 0.0));
  for (std::size_t mode = 0; mode < modes.size(); ++mode)
    for (int k = 0; k < count; ++k)
      if (mode & (static_cast<std::size_t>(1) << k))
        for (std::size_t m = 0; m < sectors; ++m) modes[mode][m] += scenario.interferers[k][m];
  return modes;
}

HypothesisSets build_hypotheses(const InterferenceScenario& scenario) {
  const auto modes = enumerate_modes(scenario);
  const std::size_t sectors = scenario.desired.size();
  HypothesisSets sets;
  sets.on.resize(modes.size());
  sets.off.resize(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i) {
    sets.on[i].resize(sectors);
    sets.off[i].resize(sectors);
    for (std::size_t m = 0; m < sectors; ++m) {
      sets.off[i][m] = modes[i][m] + scenario.noise[m];
      sets.on[i][m] = sets.off[i][m] + scenario.desired[m];
    }
  }
  return sets;
}

namespace {

void check_hypotheses(const HypothesisSets& hypotheses) {
  if (hypotheses.on.empty() || hypotheses.on.size() != hypotheses.off.size())
    throw ContractError("hypothesis sets: on and off must be non-empty and equal size");
  const std::size_t sectors = hypotheses.on[0].size();
  for (const auto& group : {hypotheses.on, hypotheses.off})
    for (const auto& intensity : group) {
      if (intensity.size() != sectors)
        throw ContractError("hypothesis sets: inconsistent sector counts");
      for (double v : intensity)
        if (!std::isfinite(v) || v <= 0.0)
          throw ContractError("hypothesis sets: intensities must be finite and positive");
    }
}

double log_sum_exp(const std::vector<double>& values) {
  const double peak = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

}  // namespace

int ml_decide_multi(const HypothesisSets& hypotheses, const PhotonCounts& counts) {
  check_hypotheses(hypotheses);
  const std::size_t sectors = hypotheses.on[0].size();
  if (counts.size() != sectors)
    throw ContractError("ml_decide_multi: counts length must equal sector count");
  auto group_log_lik = [&](const std::vector<std::vector<double>>& group) {
    std::vector<double> lls(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      double ll = 0.0;  // shared log(k!) terms cancel between the groups
      for (std::size_t m = 0; m < sectors; ++m)
        ll += static_cast<double>(counts[m]) * std::log(group[i][m]) - group[i][m];
      lls[i] = ll;
    }
    return log_sum_exp(lls);
  };
  return group_log_lik(hypotheses.on) >= group_log_lik(hypotheses.off) ? 1 : 0;
}

double pe_ml_multi(const HypothesisSets& hypotheses, double epsilon) {
  check_hypotheses(hypotheses);
  if (!(epsilon > 0.0) || epsilon >= 1.0)
    throw ContractError("pe_ml_multi: epsilon must lie in (0, 1)");
  const std::size_t sectors = hypotheses.on[0].size();
  const std::size_t modes = hypotheses.on.size();
  const double tail = epsilon / (2.0 * static_cast<double>(sectors));

  // Off intensities never exceed their on partner, so the on side alone
  // determines the truncation box.
  std::vector<int> caps(sectors, 0);
  for (std::size_t m = 0; m < sectors; ++m) {
    double worst = 0.0;
    for (const auto& intensity : hypotheses.on) worst = std::max(worst, intensity[m]);
    caps[m] = detail::poisson_quantile_cap(worst, tail);
  }
  detail::checked_lattice_size(caps);

  auto tables = [&](const std::vector<std::vector<double>>& group) {
    std::vector<std::vector<std::vector<double>>> t(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      t[i].resize(sectors);
      for (std::size_t m = 0; m < sectors; ++m)
        t[i][m] = detail::poisson_pmf_table(group[i][m], caps[m]);
    }
    return t;
  };
  const auto on_pmf = tables(hypotheses.on);
  const auto off_pmf = tables(hypotheses.off);

  const double prior = 1.0 / static_cast<double>(2 * modes);
  double error = 0.0;
  std::vector<int> point(sectors, 0);
  for (;;) {
    double on_sum = 0.0, off_sum = 0.0;
    for (std::size_t i = 0; i < modes; ++i) {
      double po = 1.0, pf = 1.0;
      for (std::size_t m = 0; m < sectors; ++m) {
        po *= on_pmf[i][m][point[m]];
        pf *= off_pmf[i][m][point[m]];
      }
      on_sum += po;
      off_sum += pf;
    }
    error += prior * std::min(on_sum, off_sum);
    std::size_t m = 0;
    while (m < sectors && ++point[m] > caps[m]) point[m++] = 0;
    if (m == sectors) break;
  }
  return error;
}

PairwiseTable build_pairwise_table(const InterferenceScenario& scenario) {
  validate_scenario(scenario);
  if (scenario.interferers.size() > kMaxTableInterferers)
    throw UnsupportedError("pairwise table: more than 12 interferers is unsupported");
  const auto started = std::chrono::steady_clock::now();
  const HypothesisSets sets = build_hypotheses(scenario);
  const int modes = static_cast<int>(sets.on.size());
  const int sectors = static_cast<int>(scenario.desired.size());

  PairwiseTable table;
  table.interferers = static_cast<int>(scenario.interferers.size());
  table.sectors = sectors;
  table.modes = modes;
  table.scenario_hash = scenario_hash(scenario);
  table.weights.assign(static_cast<std::size_t>(modes) * modes * sectors, 0.0);
  table.thresholds.assign(static_cast<std::size_t>(modes) * modes, 0.0);
  table.degenerate.assign(static_cast<std::size_t>(modes) * modes, 0);

  for (int i = 0; i < modes; ++i)
    for (int j = 0; j < modes; ++j) {
      const std::size_t row = static_cast<std::size_t>(i) * modes + j;
      if (sets.on[i] == sets.off[j]) {
        table.degenerate[row] = 1;
        continue;
      }
      const TwoUserProblem pair{sets.on[i], sets.off[j]};
      const std::vector<double> weights = optimal_weights(pair);
      table.thresholds[row] = optimal_threshold(pair, weights);
      std::copy(weights.begin(), weights.end(),
                table.weights.begin() + row * static_cast<std::size_t>(sectors));
    }
  table.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return table;
}

int successive_elimination(const PairwiseTable& table, const PhotonCounts& counts,
                           ProbeOrder order, EliminationTrace* trace) {
  if (table.modes < 1 || table.sectors < 1)
    throw ContractError("successive_elimination: empty table");
  if (counts.size() != static_cast<std::size_t>(table.sectors))
    throw ContractError("successive_elimination: counts length must equal sector count");
  if (trace) *trace = EliminationTrace{};

  std::vector<char> on_alive(static_cast<std::size_t>(table.modes), 1);
  std::vector<char> off_alive(static_cast<std::size_t>(table.modes), 1);
  int on_left = table.modes;
  int off_left = table.modes;

  while (on_left > 0 && off_left > 0) {
    int probe = -1;
    if (order == ProbeOrder::Ascending) {
      for (int i = 0; i < table.modes; ++i)
        if (on_alive[i]) {
          probe = i;
          break;
        }
    } else {
      for (int i = table.modes - 1; i >= 0; --i)
        if (on_alive[i]) {
          probe = i;
          break;
        }
    }

    EliminationTrace::Round round;
    round.probe = probe;
    bool any_short = false;
    int progressed = 0;
    for (int j = 0; j < table.modes; ++j) {
      if (!off_alive[j]) continue;
      if (table.degenerate_at(probe, j)) {
        ++round.skipped_degenerate;
        continue;
      }
      const double statistic =
          weighted_sum(table.weights_at(probe, j), counts) - table.threshold_at(probe, j);
      if (statistic >= 0.0) {
        off_alive[j] = 0;
        --off_left;
        ++progressed;
        round.eliminated_off.push_back(j);
      } else {
        any_short = true;
      }
    }
    if (any_short) {
      on_alive[probe] = 0;
      --on_left;
      ++progressed;
      round.probe_eliminated = true;
    }
    if (trace) trace->rounds.push_back(std::move(round));
    if (progressed == 0)
      throw SingularError(
          "successive_elimination: no non-degenerate comparison remains; scenario cannot "
          "separate the surviving hypotheses");
  }

  // The prober only falls when some rival test fell short, and that rival
  // stays alive, so both sides can never empty together.
  if (on_left == 0 && off_left == 0)
    throw std::logic_error("successive_elimination: both sides empty");
  const int decision = off_left == 0 ? 1 : 0;
  if (trace) trace->decision = decision;
  return decision;
}

double pe_upper_bound(const InterferenceScenario& scenario) {
  validate_scenario(scenario);
  const auto modes = enumerate_modes(scenario);
  const std::size_t sectors = scenario.desired.size();
  double total = 0.0;
  for (const auto& mode_i : modes)
    for (const auto& mode_j : modes) {
      double g2 = 0.0;
      for (std::size_t m = 0; m < sectors; ++m) {
        const double gap = scenario.desired[m] + mode_i[m] - mode_j[m];
        const double scale =
            scenario.desired[m] + mode_i[m] + mode_j[m] + 2.0 * scenario.noise[m];
        g2 += gap * gap / (2.0 * scale);
      }
      total += q_function(std::sqrt(g2));
    }
  return total / static_cast<double>(modes.size());
}

std::uint64_t scenario_hash(const InterferenceScenario& scenario) {
  validate_scenario(scenario);
  std::string canon = std::to_string(scenario.interferers.size()) + "|" +
                      std::to_string(scenario.desired.size()) + "|";
  char buf[64];
  auto append = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g,", v);
    canon += buf;
  };
  for (double v : scenario.desired) append(v);
  canon += ";";
  for (const auto& row : scenario.interferers) {
    for (double v : row) append(v);
    canon += ";";
  }
  for (double v : scenario.noise) append(v);

  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_json_string(const PairwiseTable& table) {
  const std::size_t entries = static_cast<std::size_t>(table.modes) * table.modes;
  if (entries > kMaxSerializedEntries)
    throw UnsupportedError("pairwise table serialization limited to 4096 entries");
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof hash_hex, "0x%016llx",
                static_cast<unsigned long long>(table.scenario_hash));
  ordered_json j;
  j["interferers"] = table.interferers;
  j["sectors"] = table.sectors;
  j["modes"] = table.modes;
  j["scenario_hash"] = hash_hex;
  ordered_json list = ordered_json::array();
  for (int i = 0; i < table.modes; ++i)
    for (int k = 0; k < table.modes; ++k) {
      ordered_json entry;
      entry["on"] = i;
      entry["off"] = k;
      entry["degenerate"] = table.degenerate_at(i, k);
      if (!table.degenerate_at(i, k)) {
        const auto w = table.weights_at(i, k);
        entry["weights"] = std::vector<double>(w.begin(), w.end());
        entry["threshold"] = table.threshold_at(i, k);
      }
      list.push_back(std::move(entry));
    }
  j["entries"] = std::move(list);
  return j.dump(2);
}

PairwiseTable pairwise_table_from_json_string(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("pairwise table JSON: parse failure: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("pairwise table JSON: top level must be an object");
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (key != "interferers" && key != "sectors" && key != "modes" && key != "scenario_hash" &&
        key != "entries")
      throw ConfigError("pairwise table JSON: unknown key '" + key + "'");
  }
  for (const char* key : {"interferers", "sectors", "modes"})
    if (!j.contains(key) || !j[key].is_number_integer())
      throw ConfigError(std::string("pairwise table JSON: integer '") + key + "' required");
  if (!j.contains("scenario_hash") || !j["scenario_hash"].is_string())
    throw ConfigError("pairwise table JSON: string 'scenario_hash' required");
  if (!j.contains("entries") || !j["entries"].is_array())
    throw ConfigError("pairwise table JSON: array 'entries' required");

  PairwiseTable table;
  table.interferers = j["interferers"].get<int>();
  table.sectors = j["sectors"].get<int>();
  table.modes = j["modes"].get<int>();
  if (table.interferers < 0 || table.interferers > kMaxTableInterferers ||
      table.sectors < 1 || table.modes != (1 << table.interferers))
    throw ConfigError("pairwise table JSON: inconsistent dimensions");
  const std::string hash_text = j["scenario_hash"].get<std::string>();
  if (hash_text.size() != 18 || hash_text.compare(0, 2, "0x") != 0)
    throw ConfigError("pairwise table JSON: scenario_hash must be an 0x 16-digit hex string");
  table.scenario_hash = std::stoull(hash_text.substr(2), nullptr, 16);

  const std::size_t entries = static_cast<std::size_t>(table.modes) * table.modes;
  if (j["entries"].size() != entries)
    throw ConfigError("pairwise table JSON: entry count must equal modes^2");
  table.weights.assign(entries * table.sectors, 0.0);
  table.thresholds.assign(entries, 0.0);
  table.degenerate.assign(entries, 0);
  std::vector<char> seen(entries, 0);
  for (const auto& entry : j["entries"]) {
    if (!entry.is_object() || !entry.contains("on") || !entry.contains("off") ||
        !entry.contains("degenerate"))
      throw ConfigError("pairwise table JSON: malformed entry");
    const int on = entry["on"].get<int>();
    const int off = entry["off"].get<int>();
    if (on < 0 || on >= table.modes || off < 0 || off >= table.modes)
      throw ConfigError("pairwise table JSON: entry index out of range");
    const std::size_t row = static_cast<std::size_t>(on) * table.modes + off;
    if (seen[row]) throw ConfigError("pairwise table JSON: duplicate entry");
    seen[row] = 1;
    if (entry["degenerate"].get<bool>()) {
      table.degenerate[row] = 1;
      continue;
    }
    if (!entry.contains("weights") || !entry["weights"].is_array() ||
        entry["weights"].size() != static_cast<std::size_t>(table.sectors) ||
        !entry.contains("threshold") || !entry["threshold"].is_number())
      throw ConfigError("pairwise table JSON: non-degenerate entry needs weights and threshold");
    double norm2 = 0.0;
    for (int m = 0; m < table.sectors; ++m) {
      const double w = entry["weights"][static_cast<std::size_t>(m)].get<double>();
      if (!std::isfinite(w)) throw ConfigError("pairwise table JSON: weights must be finite");
      table.weights[row * table.sectors + m] = w;
      norm2 += w * w;
    }
    if (std::fabs(norm2 - 1.0) > 1e-12)
      throw ConfigError("pairwise table JSON: weights must be unit norm to 1e-12");
    table.thresholds[row] = entry["threshold"].get<double>();
    if (!std::isfinite(table.thresholds[row]))
      throw ConfigError("pairwise table JSON: threshold must be finite");
  }
  for (std::size_t row = 0; row < entries; ++row)
    if (!seen[row]) throw ConfigError("pairwise table JSON: missing entry");
  return table;
}

}  // namespace uvsdma
