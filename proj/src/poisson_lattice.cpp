#include "poisson_lattice.hpp"

#include <cmath>

#include "uvsdma/errors.hpp"

namespace uvsdma::detail {

int poisson_quantile_cap(double mean, double tail) {
  if (!(tail > 0.0) || tail >= 1.0)
    throw ContractError("poisson_quantile_cap: tail must lie in (0, 1)");
  if (mean > kMaxExactMean)
    throw UnsupportedError("exact lattice summation limited to per-sector means below 690");
  if (mean <= 0.0) return 0;
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  const double target = 1.0 - tail;
  // Guaranteed to terminate: the loop bound is far past any achievable
  // quantile for means below kMaxExactMean with double-precision tails.
  while (cdf < target && k < 20'000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

std::vector<double> poisson_pmf_table(double mean, int cap) {
  std::vector<double> pmf(static_cast<std::size_t>(cap) + 1);
  if (mean <= 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  pmf[0] = std::exp(-mean);
  for (int k = 1; k <= cap; ++k) pmf[k] = pmf[k - 1] * mean / static_cast<double>(k);
  return pmf;
}

std::uint64_t checked_lattice_size(const std::vector<int>& caps) {
  std::uint64_t total = 1;
  for (int cap : caps) {
    total *= static_cast<std::uint64_t>(cap) + 1;
    if (total > kMaxLatticePoints)
      throw UnsupportedError("exact error summation lattice exceeds the 1e8 point limit");
  }
  return total;
}

}  // namespace uvsdma::detail
