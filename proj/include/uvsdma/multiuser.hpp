#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uvsdma/channel.hpp"

namespace uvsdma {

/// One desired user observed through a sectored detector while a small set
/// of interfering users switch on and off independently.
struct InterferenceScenario {
  std::vector<double> desired;                  // per-sector gains of the desired user
  std::vector<std::vector<double>> interferers; // per-interferer per-sector gains
  std::vector<double> noise;                    // per-sector dark/background means, > 0
};

/// Throws ContractError on shape or sign violations; refuses more than 16
/// interferers (hypothesis counts grow as 2^(count+1)).
void validate_scenario(const InterferenceScenario& scenario);

/// Summed interferer gains for every on/off mode. Mode bits are little
/// endian (bit k = interferer k active); mode 0 is all-off.
std::vector<std::vector<double>> enumerate_modes(const InterferenceScenario& scenario);

/// Total sector intensities for every hypothesis: `on[i]` has the desired
/// user transmitting over interferer mode i, `off[i]` does not.
struct HypothesisSets {
  std::vector<std::vector<double>> on;
  std::vector<std::vector<double>> off;
};

HypothesisSets build_hypotheses(const InterferenceScenario& scenario);

/// Exact mixture-likelihood decision: 1 when the desired user is judged
/// active, 0 otherwise. Ties decide active.
int ml_decide_multi(const HypothesisSets& hypotheses, const PhotonCounts& counts);

/// Exact equal-prior error of ml_decide_multi, summed over a truncated
/// lattice whose omitted mass is below `epsilon`.
double pe_ml_multi(const HypothesisSets& hypotheses, double epsilon = 1e-10);

/// Linear pairwise tests between every on-hypothesis i and off-hypothesis j,
/// stored flat (row i * modes + j). A pair whose intensities coincide in
/// every sector has no separating test and is flagged degenerate.
struct PairwiseTable {
  int interferers = 0;
  int sectors = 0;
  int modes = 0;                 // 2^interferers
  std::uint64_t scenario_hash = 0;
  double build_seconds = 0.0;    // wall clock, excluded from determinism
  std::vector<double> weights;       // modes^2 x sectors
  std::vector<double> thresholds;    // modes^2
  std::vector<std::uint8_t> degenerate;  // modes^2

  std::span<const double> weights_at(int on_index, int off_index) const {
    const std::size_t row = static_cast<std::size_t>(on_index) * modes + off_index;
    return {weights.data() + row * sectors, static_cast<std::size_t>(sectors)};
  }
  double threshold_at(int on_index, int off_index) const {
    return thresholds[static_cast<std::size_t>(on_index) * modes + off_index];
  }
  bool degenerate_at(int on_index, int off_index) const {
    return degenerate[static_cast<std::size_t>(on_index) * modes + off_index] != 0;
  }
};

/// Builds all modes^2 pairwise detectors. Cost grows as 4^interferers;
/// refuses more than 12 interferers.
PairwiseTable build_pairwise_table(const InterferenceScenario& scenario);

/// Which hypothesis index probes first in each elimination round.
enum class ProbeOrder { Ascending, Descending };

/// Per-round record of who probed, who fell and what was skipped.
struct EliminationTrace {
  struct Round {
    int probe = 0;                     // on-hypothesis index that ran the tests
    std::vector<int> eliminated_off;   // off-hypothesis indices removed this round
    bool probe_eliminated = false;
    int skipped_degenerate = 0;
  };
  std::vector<Round> rounds;
  int decision = 0;
};

/// Successive pairwise elimination: the surviving on-hypothesis with the
/// extreme index (per `order`) tests every surviving off-hypothesis; an
/// off-hypothesis falls when the test statistic reaches its threshold, and
/// the prober falls at round end when any test fell short. Returns 1 when
/// the off side empties first. Degenerate pairs are skipped and counted; a
/// round with no possible progress throws SingularError.
int successive_elimination(const PairwiseTable& table, const PhotonCounts& counts,
                           ProbeOrder order = ProbeOrder::Ascending,
                           EliminationTrace* trace = nullptr);

/// Closed-form union bound on the elimination error, averaging the pairwise
/// exponents over all interferer mode pairs.
double pe_upper_bound(const InterferenceScenario& scenario);

/// Stable content hash of the hypothesis intensities (FNV-1a over a
/// canonical text form); keys serialized tables to their scenario.
std::uint64_t scenario_hash(const InterferenceScenario& scenario);

/// JSON form with per-pair entries and the scenario hash.
std::string to_json_string(const PairwiseTable& table);

/// Parses and validates the JSON form. Throws ConfigError on malformed
/// input.
PairwiseTable pairwise_table_from_json_string(const std::string& text);

}  // namespace uvsdma
