#pragma once

#include <cstdint>
#include <vector>

namespace uvsdma::detail {

/// Smallest n with P(Poisson(mean) <= n) >= 1 - tail.
/// Accumulates the pmf directly; refuses means large enough to underflow.
int poisson_quantile_cap(double mean, double tail);

/// pmf values P(N = 0..cap) for Poisson(mean).
std::vector<double> poisson_pmf_table(double mean, int cap);

/// Product of per-sector cap+1 sizes, guarded against runaway lattices.
std::uint64_t checked_lattice_size(const std::vector<int>& caps);

inline constexpr double kMaxExactMean = 690.0;     // exp(-mean) underflows past ~745
inline constexpr std::uint64_t kMaxLatticePoints = 100'000'000;

}  // namespace uvsdma::detail
