#pragma once

#include <cstdint>
#include <vector>

namespace uvsdma::sim {

/// Streaming first/second-moment accumulator for scalar samples. Merging is
/// plain summation, so folding per-chunk partials in a fixed chunk order
/// reproduces the single-threaded result bit for bit.
struct Accumulator {
  double sum = 0.0;
  double sum_squares = 0.0;
  std::int64_t count = 0;

  void add(double value) {
    sum += value;
    sum_squares += value * value;
    ++count;
  }
  void merge(const Accumulator& other) {
    sum += other.sum;
    sum_squares += other.sum_squares;
    count += other.count;
  }

  double mean() const;
  /// Unbiased sample variance; zero below two samples.
  double sample_variance() const;
  /// Monte-Carlo standard error of the mean, sqrt(variance / count).
  double standard_error() const;
};

/// Success counter for empirical probabilities.
struct BinaryCounter {
  std::int64_t successes = 0;
  std::int64_t trials = 0;

  void add(bool success) {
    successes += success ? 1 : 0;
    ++trials;
  }
  void merge(const BinaryCounter& other) {
    successes += other.successes;
    trials += other.trials;
  }

  double rate() const;
  /// Binomial standard error sqrt(p (1 - p) / n).
  double standard_error() const;
};

/// Wilson score interval for a binomial proportion.
struct WilsonInterval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson interval at the given normal quantile (1.96 for 95% coverage).
WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z = 1.96);

/// Standard normal lower-tail probability.
double normal_cdf(double x);

/// Standard normal density.
double normal_pdf(double x);

/// Median of the values (averaged middle pair for even counts).
/// Throws ContractError on an empty input.
double median_of(std::vector<double> values);

/// One-sample Kolmogorov-Smirnov comparison against a normal surrogate.
struct KsResult {
  double distance = 0.0;
  /// Binomial noise of the empirical CDF at the point where the gap is
  /// attained, sqrt(F (1 - F) / n); the sampling-noise scale of `distance`.
  double standard_error = 0.0;
};

/// Exact KS distance between the empirical CDF of `samples` and
/// Normal(mean, sd), handling ties. Throws ContractError when `samples` is
/// empty or sd is not positive.
KsResult ks_against_normal(std::vector<double> samples, double mean, double sd);

}  // namespace uvsdma::sim
