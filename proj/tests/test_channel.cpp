#include <cmath>
#include <vector>

#include "doctest.h"
#include "uvsdma/channel.hpp"
#include "uvsdma/errors.hpp"
#include "uvsdma/rng.hpp"

using namespace uvsdma;

TEST_CASE("upper tail function hits reference values") {
  CHECK(q_function(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q_function(1.3363062095621219) == doctest::Approx(0.0907246038607102).epsilon(1e-13));
  CHECK(q_function(0.4472135954999579) == doctest::Approx(0.3273604230092885).epsilon(1e-13));
  CHECK(q_function(1.7888543819998317) == doctest::Approx(0.03681913506015135).epsilon(1e-13));
  for (double x : {0.3, 1.1, 2.7}) CHECK(q_function(-x) + q_function(x) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("physical link budget converts to a mean photon count") {
  PhysicalLink link;
  link.quantum_efficiency = 0.2;
  link.transmit_power_w = 1e-3;
  link.slot_seconds = 1e-6;
  link.losses = 1e12;
  link.frequency_hz = 1e15;
  CHECK(gain_from_physics(link) == doctest::Approx(3.018380359284304e-4).epsilon(1e-12));

  PhysicalLink bad = link;
  bad.quantum_efficiency = 0.0;
  CHECK_THROWS_AS(gain_from_physics(bad), ContractError);
  bad = link;
  bad.quantum_efficiency = 1.5;
  CHECK_THROWS_AS(gain_from_physics(bad), ContractError);
  bad = link;
  bad.slot_seconds = -1.0;
  CHECK_THROWS_AS(gain_from_physics(bad), ContractError);
  bad = link;
  bad.frequency_hz = 0.0;
  CHECK_THROWS_AS(gain_from_physics(bad), ContractError);
}

namespace {

GainMatrix example_gains() {
  // 3 users x 2 sectors.
  return GainMatrix{3, 2, {1.0, 2.0, 0.5, 0.25, 4.0, 0.0}};
}

}  // namespace

TEST_CASE("intensity composition adds active users onto the noise floor") {
  const GainMatrix gains = example_gains();
  const std::vector<double> noise{0.1, 0.2};

  const std::vector<std::uint8_t> quiet_flags(3, 0);
  const std::vector<std::uint8_t> ac{1, 0, 1};
  const auto quiet = compose_intensity(gains, noise, quiet_flags);
  CHECK(quiet == noise);

  const auto lit = compose_intensity(gains, noise, ac);
  CHECK(lit[0] == doctest::Approx(1.0 + 4.0 + 0.1));
  CHECK(lit[1] == doctest::Approx(2.0 + 0.0 + 0.2));
}

TEST_CASE("intensity composition validates shapes and signs") {
  GainMatrix gains = example_gains();
  const std::vector<double> noise{0.1, 0.2};
  const std::vector<std::uint8_t> active{1, 0, 1};
  const std::vector<std::uint8_t> one_flag{1};

  CHECK_THROWS_AS(compose_intensity(gains, std::vector<double>{0.1}, active), ContractError);
  CHECK_THROWS_AS(compose_intensity(gains, noise, one_flag), ContractError);
  gains.values[2] = -1.0;
  CHECK_THROWS_AS(compose_intensity(gains, noise, active), ContractError);
  gains = example_gains();
  gains.values.pop_back();
  CHECK_THROWS_AS(compose_intensity(gains, noise, active), ContractError);
  CHECK_THROWS_AS(compose_intensity(example_gains(), std::vector<double>{0.1, -0.2}, active),
                  ContractError);
}

TEST_CASE("weighted sum and its moments") {
  const std::vector<double> weights{0.5, -0.25, 1.0};
  const PhotonCounts counts{4, 8, 3};
  CHECK(weighted_sum(weights, counts) == doctest::Approx(0.5 * 4 - 0.25 * 8 + 3.0));
  CHECK_THROWS_AS(weighted_sum(weights, PhotonCounts{1, 2}), ContractError);

  const std::vector<double> intensity{2.0, 3.0, 1.5};
  const SumMoments mom = weighted_sum_moments(weights, intensity);
  CHECK(mom.mean == doctest::Approx(0.5 * 2 - 0.25 * 3 + 1.5));
  CHECK(mom.variance == doctest::Approx(0.25 * 2 + 0.0625 * 3 + 1.5));
  CHECK_THROWS_AS(weighted_sum_moments(weights, std::vector<double>{1.0, -2.0, 3.0}),
                  ContractError);
}

TEST_CASE("count sampling is per-sector deterministic in the stream") {
  const std::vector<double> intensity{3.0, 0.0, 45.0};
  CounterRng r1(99, 4), r2(99, 4);
  const PhotonCounts c1 = sample_counts(intensity, r1);
  const PhotonCounts c2 = sample_counts(intensity, r2);
  CHECK(c1 == c2);
  CHECK(c1.size() == 3);
  CHECK(c1[1] == 0);
  CHECK(c1[0] >= 0);
  CHECK(c1[2] >= 0);
}
