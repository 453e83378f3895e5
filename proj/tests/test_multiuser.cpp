#include <cmath>
#include <vector>

#include "doctest.h"
#include "uvsdma/errors.hpp"
#include "uvsdma/multiuser.hpp"
#include "uvsdma/two_user.hpp"

using namespace uvsdma;

namespace {

InterferenceScenario one_interferer() { return InterferenceScenario{{5.0}, {{3.0}}, {1.0}}; }

InterferenceScenario two_interferers() {
  return InterferenceScenario{{5.0}, {{3.0}, {2.0}}, {1.0}};
}

InterferenceScenario no_interferers() { return InterferenceScenario{{5.0}, {}, {1.0}}; }

}  // namespace

TEST_CASE("scenario validation") {
  CHECK_THROWS_AS(validate_scenario(InterferenceScenario{{}, {}, {}}), ContractError);
  CHECK_THROWS_AS(validate_scenario(InterferenceScenario{{5.0}, {}, {0.0}}), ContractError);
  CHECK_THROWS_AS(validate_scenario(InterferenceScenario{{5.0}, {}, {1.0, 1.0}}), ContractError);
  CHECK_THROWS_AS(validate_scenario(InterferenceScenario{{5.0}, {{1.0, 2.0}}, {1.0}}),
                  ContractError);
  CHECK_THROWS_AS(validate_scenario(InterferenceScenario{{-1.0}, {}, {1.0}}), ContractError);
  InterferenceScenario crowded{{1.0}, {}, {1.0}};
  crowded.interferers.assign(17, {1.0});
  CHECK_THROWS_AS(validate_scenario(crowded), UnsupportedError);
}

TEST_CASE("interferer modes enumerate little-endian with all-off first") {
  const auto modes = enumerate_modes(two_interferers());
  REQUIRE(modes.size() == 4);
  CHECK(modes[0] == std::vector<double>{0.0});
  CHECK(modes[1] == std::vector<double>{3.0});
  CHECK(modes[2] == std::vector<double>{2.0});
  CHECK(modes[3] == std::vector<double>{5.0});
}

TEST_CASE("hypothesis sets stack desired, interference and noise") {
  const HypothesisSets sets = build_hypotheses(two_interferers());
  REQUIRE(sets.on.size() == 4);
  CHECK(sets.on[0] == std::vector<double>{6.0});
  CHECK(sets.on[1] == std::vector<double>{9.0});
  CHECK(sets.on[2] == std::vector<double>{8.0});
  CHECK(sets.on[3] == std::vector<double>{11.0});
  CHECK(sets.off[0] == std::vector<double>{1.0});
  CHECK(sets.off[1] == std::vector<double>{4.0});
  CHECK(sets.off[2] == std::vector<double>{3.0});
  CHECK(sets.off[3] == std::vector<double>{6.0});
}

TEST_CASE("mixture likelihood decision with no interferers reduces to the pair rule") {
  const HypothesisSets sets = build_hypotheses(no_interferers());
  const TwoUserProblem pair{{6.0}, {1.0}};
  for (std::int64_t n = 0; n <= 60; ++n) {
    const PhotonCounts counts{n};
    const int multi = ml_decide_multi(sets, counts);
    const int pair_decision = ml_decide_pair(pair, counts) == Hypothesis::A ? 1 : 0;
    CHECK(multi == pair_decision);
  }
  CHECK(pe_ml_multi(sets) == doctest::Approx(0.07113510074402657).epsilon(1e-10));
}

TEST_CASE("mixture likelihood ties decide active") {
  // Zero desired gain makes both groups identical, so every count ties.
  const HypothesisSets sets = build_hypotheses(InterferenceScenario{{0.0}, {}, {1.0}});
  for (std::int64_t n = 0; n <= 5; ++n) CHECK(ml_decide_multi(sets, PhotonCounts{n}) == 1);
}

TEST_CASE("exact mixture error matches fixed references") {
  CHECK(pe_ml_multi(build_hypotheses(one_interferer())) ==
        doctest::Approx(0.17871076336480154).epsilon(1e-10));
  CHECK(pe_ml_multi(build_hypotheses(two_interferers())) ==
        doctest::Approx(0.2054785171051362).epsilon(1e-10));
  CHECK_THROWS_AS(pe_ml_multi(build_hypotheses(one_interferer()), 2.0), ContractError);
}

TEST_CASE("union bound matches fixed references") {
  CHECK(pe_upper_bound(no_interferers()) == doctest::Approx(0.0907246038607102).epsilon(1e-12));
  CHECK(pe_upper_bound(one_interferer()) ==
        doctest::Approx(0.30915197288231655).epsilon(1e-12));
  CHECK(pe_upper_bound(two_interferers()) ==
        doctest::Approx(0.7237411415972823).epsilon(1e-12));
}

TEST_CASE("pairwise table holds the four per-pair tests") {
  const PairwiseTable table = build_pairwise_table(one_interferer());
  CHECK(table.modes == 2);
  CHECK(table.sectors == 1);
  CHECK(table.interferers == 1);
  CHECK(table.threshold_at(0, 0) == doctest::Approx(2.854839989049065).epsilon(1e-9));
  CHECK(table.threshold_at(0, 1) == doctest::Approx(5.372669848157243).epsilon(1e-9));
  CHECK(table.threshold_at(1, 0) == doctest::Approx(3.38701603915648).epsilon(1e-9));
  CHECK(table.threshold_at(1, 1) == doctest::Approx(6.468283973107361).epsilon(1e-9));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK_FALSE(table.degenerate_at(i, j));
      CHECK(table.weights_at(i, j)[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
  CHECK(table.build_seconds >= 0.0);

  InterferenceScenario crowded{{1.0}, {}, {1.0}};
  crowded.interferers.assign(13, {1.0});
  CHECK_THROWS_AS(build_pairwise_table(crowded), UnsupportedError);
}

TEST_CASE("elimination reproduces the derived integer rule") {
  // For desired 5, one interferer 3, noise 1, walking the thresholds shows
  // the cascade decides active exactly when the count reaches 6.
  const PairwiseTable table = build_pairwise_table(one_interferer());
  for (std::int64_t n = 0; n <= 20; ++n) {
    const int expected = n >= 6 ? 1 : 0;
    CHECK(successive_elimination(table, PhotonCounts{n}) == expected);
  }

  EliminationTrace trace;
  CHECK(successive_elimination(table, PhotonCounts{6}, ProbeOrder::Ascending, &trace) == 1);
  REQUIRE(trace.rounds.size() == 1);
  CHECK(trace.rounds[0].probe == 0);
  CHECK(trace.rounds[0].eliminated_off == std::vector<int>{0, 1});
  CHECK_FALSE(trace.rounds[0].probe_eliminated);
  CHECK(trace.decision == 1);

  CHECK(successive_elimination(table, PhotonCounts{3}, ProbeOrder::Ascending, &trace) == 0);
  REQUIRE(trace.rounds.size() == 2);
  CHECK(trace.rounds[0].probe == 0);
  CHECK(trace.rounds[0].eliminated_off == std::vector<int>{0});
  CHECK(trace.rounds[0].probe_eliminated);
  CHECK(trace.rounds[1].probe == 1);
  CHECK(trace.rounds[1].probe_eliminated);
  CHECK(trace.decision == 0);

  CHECK_THROWS_AS(successive_elimination(table, PhotonCounts{1, 2}), ContractError);
}

TEST_CASE("probe order selects which side starts") {
  const PairwiseTable table = build_pairwise_table(two_interferers());
  EliminationTrace trace;
  CHECK(successive_elimination(table, PhotonCounts{2}, ProbeOrder::Ascending, &trace) == 0);
  CHECK(trace.rounds[0].probe == 0);
  CHECK(successive_elimination(table, PhotonCounts{2}, ProbeOrder::Descending, &trace) == 0);
  CHECK(trace.rounds[0].probe == 3);
}

TEST_CASE("a mode sum that mirrors the desired gain stalls the cascade") {
  // Desired 5 equals interferer mode {3,2}, so hypothesis (on, mode 0) and
  // (off, mode 3) coincide: once only that comparison is left, no progress
  // is possible and the cascade reports the degeneracy.
  const PairwiseTable table = build_pairwise_table(two_interferers());
  CHECK(table.degenerate_at(0, 3));
  CHECK_THROWS_AS(successive_elimination(table, PhotonCounts{9}), SingularError);
}

TEST_CASE("degenerate pairs are flagged, skipped and counted") {
  // Desired gain equals the lone interferer gain, so hypothesis (on, mode 0)
  // coincides with (off, mode 1).
  const InterferenceScenario mirrored{{2.0}, {{2.0}}, {1.0}};
  const PairwiseTable table = build_pairwise_table(mirrored);
  CHECK(table.degenerate_at(0, 1));
  CHECK_FALSE(table.degenerate_at(0, 0));
  CHECK_FALSE(table.degenerate_at(1, 0));
  CHECK_FALSE(table.degenerate_at(1, 1));

  // A huge count eliminates off-0 immediately, leaving only the degenerate
  // pairing for probe 0: no further progress is possible.
  EliminationTrace trace;
  CHECK_THROWS_AS(successive_elimination(table, PhotonCounts{50}, ProbeOrder::Ascending, &trace),
                  SingularError);

  // A tiny count knocks out both probes instead and the cascade resolves.
  CHECK(successive_elimination(table, PhotonCounts{0}, ProbeOrder::Ascending, &trace) == 0);
  bool counted_skip = false;
  for (const auto& round : trace.rounds) counted_skip |= round.skipped_degenerate > 0;
  CHECK(counted_skip);
}

TEST_CASE("elimination and mixture decisions agree often but not always") {
  const HypothesisSets sets = build_hypotheses(one_interferer());
  const PairwiseTable table = build_pairwise_table(one_interferer());
  int agree = 0;
  for (std::int64_t n = 0; n <= 30; ++n) {
    const PhotonCounts counts{n};
    agree += successive_elimination(table, counts) == ml_decide_multi(sets, counts);
  }
  CHECK(agree >= 29);  // the rules split only near the boundary
}

TEST_CASE("scenario hashes separate different scenarios") {
  const std::uint64_t h1 = scenario_hash(one_interferer());
  const std::uint64_t h2 = scenario_hash(two_interferers());
  InterferenceScenario tweaked = one_interferer();
  tweaked.noise[0] = 1.0000001;
  CHECK(h1 != h2);
  CHECK(h1 != scenario_hash(tweaked));
  CHECK(h1 == scenario_hash(one_interferer()));
}

TEST_CASE("pairwise table serialization round-trips including degenerate entries") {
  const InterferenceScenario mirrored{{2.0}, {{2.0}}, {1.0}};
  for (const auto& scenario : {two_interferers(), mirrored}) {
    const PairwiseTable table = build_pairwise_table(scenario);
    const PairwiseTable back = pairwise_table_from_json_string(to_json_string(table));
    CHECK(back.interferers == table.interferers);
    CHECK(back.sectors == table.sectors);
    CHECK(back.modes == table.modes);
    CHECK(back.scenario_hash == table.scenario_hash);
    CHECK(back.weights == table.weights);
    CHECK(back.thresholds == table.thresholds);
    CHECK(back.degenerate == table.degenerate);
  }

  CHECK_THROWS_AS(pairwise_table_from_json_string("{}"), ConfigError);
  CHECK_THROWS_AS(pairwise_table_from_json_string("not json"), ConfigError);
  const std::string good = to_json_string(build_pairwise_table(one_interferer()));
  std::string bad_hash = good;
  const auto hash_pos = bad_hash.find("0x");
  bad_hash.replace(hash_pos, 2, "0y");
  CHECK_THROWS_AS(pairwise_table_from_json_string(bad_hash), ConfigError);
}

TEST_CASE("a desired gain outside the interference difference set avoids degenerate pairs") {
  // Elimination stalls whenever the survivors reduce to a pair of identical
  // hypotheses; with one sector that happens iff the desired gain equals a
  // difference of two interferer subset sums. A desired gain above the total
  // interference is always safe. The shipped reference scenarios rely on it.
  for (const auto& interferers :
       {std::vector<std::vector<double>>{{3.0}},
        std::vector<std::vector<double>>{{3.0}, {2.0}},
        std::vector<std::vector<double>>{{3.0}, {2.0}, {1.0}}}) {
    const InterferenceScenario scenario{{7.0}, interferers, {1.0}};
    const PairwiseTable table = build_pairwise_table(scenario);
    for (const std::uint8_t flag : table.degenerate) CHECK(flag == 0);
    for (std::int64_t n = 0; n <= 40; ++n) {
      CHECK_NOTHROW(successive_elimination(table, PhotonCounts{n}));
    }
  }

  // The collision case: desired 4 equals the {3,1} subset sum, so the
  // all-off on-hypothesis mirrors one off-hypothesis and some counts leave
  // only that pair standing.
  const InterferenceScenario colliding{{4.0}, {{3.0}, {2.0}, {1.0}}, {1.0}};
  const PairwiseTable table = build_pairwise_table(colliding);
  std::int64_t degenerate = 0;
  for (const std::uint8_t flag : table.degenerate) degenerate += flag != 0 ? 1 : 0;
  CHECK(degenerate > 0);
  bool stalled = false;
  for (std::int64_t n = 0; n <= 40 && !stalled; ++n) {
    try {
      successive_elimination(table, PhotonCounts{n});
    } catch (const SingularError&) {
      stalled = true;
    }
  }
  CHECK(stalled);
}
