#include "uvsdma/channel.hpp"

#include <cmath>
#include <cstddef>

#include "uvsdma/errors.hpp"

namespace uvsdma {

namespace {

// 2019 SI exact value.
constexpr double kPlanck = 6.62607015e-34;

bool all_finite_nonneg(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x) || x < 0.0) return false;
  return true;
}

}  // namespace

void validate_gain_matrix(const GainMatrix& gains) {
  if (gains.users <= 0 || gains.sectors <= 0)
    throw ContractError("gain matrix: users and sectors must be positive");
  if (gains.values.size() != static_cast<std::size_t>(gains.users) * gains.sectors)
    throw ContractError("gain matrix: values size does not match users x sectors");
  if (!all_finite_nonneg(gains.values))
    throw ContractError("gain matrix: entries must be finite and non-negative");
}

void validate_noise(std::span<const double> noise) {
  if (!all_finite_nonneg(noise))
    throw ContractError("noise vector: entries must be finite and non-negative");
}

double gain_from_physics(const PhysicalLink& link) {
  if (!(link.quantum_efficiency > 0.0) || link.quantum_efficiency > 1.0)
    throw ContractError("gain_from_physics: quantum efficiency must lie in (0, 1]");
  if (!(link.transmit_power_w > 0.0) || !std::isfinite(link.transmit_power_w))
    throw ContractError("gain_from_physics: transmit power must be positive");
  if (!(link.slot_seconds > 0.0) || !std::isfinite(link.slot_seconds))
    throw ContractError("gain_from_physics: slot duration must be positive");
  if (!(link.losses > 0.0) || !std::isfinite(link.losses))
    throw ContractError("gain_from_physics: losses must be positive");
  if (!(link.frequency_hz > 0.0) || !std::isfinite(link.frequency_hz))
    throw ContractError("gain_from_physics: frequency must be positive");
  return link.quantum_efficiency * link.transmit_power_w * link.slot_seconds /
         (link.losses * kPlanck * link.frequency_hz);
}

std::vector<double> compose_intensity(const GainMatrix& gains, std::span<const double> noise,
                                      std::span<const std::uint8_t> active) {
  validate_gain_matrix(gains);
  validate_noise(noise);
  if (noise.size() != static_cast<std::size_t>(gains.sectors))
    throw ContractError("compose_intensity: noise length must equal sector count");
  if (active.size() != static_cast<std::size_t>(gains.users))
    throw ContractError("compose_intensity: activity length must equal user count");
  std::vector<double> intensity(noise.begin(), noise.end());
  for (int k = 0; k < gains.users; ++k) {
    if (!active[k]) continue;
    for (int m = 0; m < gains.sectors; ++m) intensity[m] += gains.at(k, m);
  }
  return intensity;
}

PhotonCounts sample_counts(std::span<const double> intensity, CounterRng& rng) {
  PhotonCounts counts(intensity.size());
  for (std::size_t m = 0; m < intensity.size(); ++m) counts[m] = sample_poisson(intensity[m], rng);
  return counts;
}

double weighted_sum(std::span<const double> weights, const PhotonCounts& counts) {
  if (weights.size() != counts.size())
    throw ContractError("weighted_sum: weights and counts must have equal length");
  double sum = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m)
    sum += weights[m] * static_cast<double>(counts[m]);
  return sum;
}

SumMoments weighted_sum_moments(std::span<const double> weights,
                                std::span<const double> intensity) {
  if (weights.size() != intensity.size())
    throw ContractError("weighted_sum_moments: weights and intensity must have equal length");
  if (!all_finite_nonneg(intensity))
    throw ContractError("weighted_sum_moments: intensities must be finite and non-negative");
  SumMoments mom;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    mom.mean += weights[m] * intensity[m];
    mom.variance += weights[m] * weights[m] * intensity[m];
  }
  return mom;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace uvsdma
