#include "uvsdma/sim/stats.hpp"

#include <algorithm>
#include <cmath>

#include "uvsdma/errors.hpp"

namespace uvsdma::sim {

double Accumulator::mean() const { return count > 0 ? sum / static_cast<double>(count) : 0.0; }

double Accumulator::sample_variance() const {
  if (count < 2) return 0.0;
  const double n = static_cast<double>(count);
  const double centered = sum_squares - sum * sum / n;
  return std::max(0.0, centered / (n - 1.0));
}

double Accumulator::standard_error() const {
  return count > 0 ? std::sqrt(sample_variance() / static_cast<double>(count)) : 0.0;
}

double BinaryCounter::rate() const {
  return trials > 0 ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
}

double BinaryCounter::standard_error() const {
  if (trials <= 0) return 0.0;
  const double p = rate();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
  if (trials <= 0 || successes < 0 || successes > trials) {
    throw ContractError("wilson_interval: need 0 <= successes <= trials with trials > 0");
  }
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw ContractError("median_of: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

KsResult ks_against_normal(std::vector<double> samples, double mean, double sd) {
  if (samples.empty()) throw ContractError("ks_against_normal: empty sample");
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
    throw ContractError("ks_against_normal: surrogate needs finite mean and positive sd");
  }
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  KsResult result;
  double f_at_max = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double model = normal_cdf((samples[i] - mean) / sd);
    // Empirical CDF jumps at each sample: compare the model against the
    // step's top and bottom. Ties still attain their extremes at the
    // first and last equal sample, so no grouping pass is needed.
    const double above = static_cast<double>(i + 1) / n - model;
    const double below = model - static_cast<double>(i) / n;
    const double gap = std::max(above, below);
    if (gap > result.distance) {
      result.distance = gap;
      f_at_max = model;
    }
  }
  result.standard_error = std::sqrt(f_at_max * (1.0 - f_at_max) / n);
  return result;
}

}  // namespace uvsdma::sim
