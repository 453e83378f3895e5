#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uvsdma/rng.hpp"

namespace uvsdma {

/// Photon counts observed at each detector sector during one slot.
using PhotonCounts = std::vector<std::int64_t>;

/// Per-user, per-sector mean photon gains. Row k holds user k's contribution
/// to each of the `sectors` sector intensities when that user transmits.
struct GainMatrix {
  int users = 0;
  int sectors = 0;
  std::vector<double> values;  // row-major, users x sectors

  double at(int user, int sector) const { return values[static_cast<std::size_t>(user) * sectors + sector]; }
};

/// Throws ContractError unless dimensions are positive, sizes agree, and all
/// entries are finite and non-negative.
void validate_gain_matrix(const GainMatrix& gains);

/// Throws ContractError unless every entry is finite and non-negative.
void validate_noise(std::span<const double> noise);

/// Physical link budget for a single user-to-sector path.
struct PhysicalLink {
  double quantum_efficiency = 0.0;  // dimensionless, in (0, 1]
  double transmit_power_w = 0.0;    // watts
  double slot_seconds = 0.0;        // integration time per slot
  double losses = 0.0;              // dimensionless attenuation divisor, >= 1 typical
  double frequency_hz = 0.0;        // optical carrier frequency
};

/// Mean photon count per slot implied by a physical link budget:
/// efficiency * power * slot / (losses * h * frequency).
double gain_from_physics(const PhysicalLink& link);

/// Sector intensities for one slot: for each sector, the sum of the gains of
/// active users plus that sector's dark/background mean. Activity flags are
/// 0/1 bytes, one per user.
std::vector<double> compose_intensity(const GainMatrix& gains, std::span<const double> noise,
                                      std::span<const std::uint8_t> active);

/// Independent Poisson draw per sector.
PhotonCounts sample_counts(std::span<const double> intensity, CounterRng& rng);

/// Linear statistic sum_m weights[m] * counts[m].
double weighted_sum(std::span<const double> weights, const PhotonCounts& counts);

struct SumMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact mean and variance of the weighted sum under independent Poisson
/// counts with the given sector intensities.
SumMoments weighted_sum_moments(std::span<const double> weights, std::span<const double> intensity);

/// Upper-tail probability of a standard normal, Q(x) = P(Z > x).
double q_function(double x);

}  // namespace uvsdma
