#pragma once

#include <span>
#include <string>
#include <vector>

#include "uvsdma/channel.hpp"

namespace uvsdma {

/// Binary decision between two intensity hypotheses.
enum class Hypothesis { A, B };

/// Total per-sector intensities (signal plus noise) under each hypothesis.
/// Every entry must be strictly positive; callers with structurally dark
/// sectors should floor them at a tiny value such as 1e-12 first.
struct TwoUserProblem {
  std::vector<double> intensity_a;
  std::vector<double> intensity_b;
};

/// Throws ContractError unless both vectors are non-empty, equal-length,
/// finite and strictly positive.
void validate_problem(const TwoUserProblem& problem);

/// Unit-norm sector weights proportional to (a - b) / (a + b).
/// Throws SingularError when the hypotheses are identical.
std::vector<double> optimal_weights(const TwoUserProblem& problem);

/// Crossing point of the two Gaussian surrogate densities of the weighted
/// sum. Falls back to the midpoint of the means when the variances agree to
/// within a 1e-9 relative tolerance (the general form divides by their
/// difference). `weights` must be unit-norm.
double optimal_threshold(const TwoUserProblem& problem, std::span<const double> weights);

/// Linear detector: decide the upper-tail hypothesis when the weighted sum
/// reaches the threshold.
struct ThresholdDetector {
  std::vector<double> weights;  // unit norm
  double threshold = 0.0;
  Hypothesis upper = Hypothesis::A;  // hypothesis with the larger weighted mean
};

/// Detector with optimal weights and the matching surrogate threshold.
ThresholdDetector make_detector(const TwoUserProblem& problem);

/// Detector for caller-chosen weights (normalized internally) with the
/// surrogate threshold for those weights.
ThresholdDetector detector_for_weights(const TwoUserProblem& problem,
                                       std::span<const double> weights);

/// Applies the detector; ties go to the upper-tail hypothesis.
Hypothesis decide(const ThresholdDetector& detector, const PhotonCounts& counts);

/// Equal-prior error probability of the detector under the Gaussian
/// surrogate of the weighted sum.
double pe_gaussian(const TwoUserProblem& problem, const ThresholdDetector& detector);

/// Closed-form error of the optimally weighted detector,
/// Q(sqrt(sum_m (a-b)^2 / (2(a+b)))).
double pe_threshold_closed_form(const TwoUserProblem& problem);

/// Exact likelihood comparison on the Poisson counts; ties decide A.
Hypothesis ml_decide_pair(const TwoUserProblem& problem, const PhotonCounts& counts);

/// Equal-prior error of the exact ML rule, summed over a truncated count
/// lattice whose omitted tail mass is below `epsilon`.
double pe_ml_pair(const TwoUserProblem& problem, double epsilon = 1e-10);

/// Magnitude of the derivative of the closed-form error with respect to one
/// sector's hypothesis-A intensity. Zero when that sector's intensities
/// coincide.
double pe_derivative_magnitude(const TwoUserProblem& problem, int sector);

/// Error drift bound K * delta for a calibration offset of size delta on a
/// design with exponent numerator C and denominator scale D:
/// K = 3 exp(-C / (8 D)) / sqrt(2 pi C / D).
double sensitivity_bound(double c, double d, double delta);

/// Deflection-style objective sum w (a-b) / (sqrt(sum w^2 a) + sqrt(sum w^2 b)).
double div_objective(const TwoUserProblem& problem, std::span<const double> weights);

/// Closed-form lower bound sum w (a-b) / (sqrt(2) sqrt(sum w^2 (a+b))).
/// Equals the closed-form exponent at the optimal weights.
double div_lower_bound(const TwoUserProblem& problem, std::span<const double> weights);

/// JSON form {"weights", "threshold", "orientation"}.
std::string to_json_string(const ThresholdDetector& detector);

/// Parses and validates the JSON form (unit norm to 1e-12).
/// Throws ConfigError on malformed input.
ThresholdDetector detector_from_json_string(const std::string& text);

}  // namespace uvsdma
