#include "uvsdma/two_user.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "poisson_lattice.hpp"
#include "uvsdma/errors.hpp"

namespace uvsdma {

using ordered_json = nlohmann::ordered_json;

void validate_problem(const TwoUserProblem& problem) {
  if (problem.intensity_a.empty() || problem.intensity_a.size() != problem.intensity_b.size())
    throw ContractError("two-user problem: intensities must be non-empty and equal length");
  for (std::size_t m = 0; m < problem.intensity_a.size(); ++m) {
    const double a = problem.intensity_a[m];
    const double b = problem.intensity_b[m];
    if (!std::isfinite(a) || !std::isfinite(b) || a <= 0.0 || b <= 0.0)
      throw ContractError(
          "two-user problem: intensities must be finite and strictly positive; "
          "floor structurally dark sectors at a tiny value such as 1e-12");
  }
}

std::vector<double> optimal_weights(const TwoUserProblem& problem) {
  validate_problem(problem);
  const std::size_t sectors = problem.intensity_a.size();
  std::vector<double> weights(sectors);
  double norm2 = 0.0;
  for (std::size_t m = 0; m < sectors; ++m) {
    const double a = problem.intensity_a[m];
    const double b = problem.intensity_b[m];
    weights[m] = (a - b) / (a + b);
    norm2 += weights[m] * weights[m];
  }
  if (norm2 == 0.0)
    throw SingularError("optimal_weights: hypotheses are identical in every sector");
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& w : weights) w *= inv;
  return weights;
}

namespace {

void check_weights(const TwoUserProblem& problem, std::span<const double> weights) {
  if (weights.size() != problem.intensity_a.size())
    throw ContractError("weights length must equal sector count");
  double norm2 = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w)) throw ContractError("weights must be finite");
    norm2 += w * w;
  }
  if (std::fabs(norm2 - 1.0) > 1e-9) throw ContractError("weights must be unit norm");
}

}  // namespace

double optimal_threshold(const TwoUserProblem& problem, std::span<const double> weights) {
  validate_problem(problem);
  check_weights(problem, weights);
  const SumMoments ma = weighted_sum_moments(weights, problem.intensity_a);
  const SumMoments mb = weighted_sum_moments(weights, problem.intensity_b);
  const double va = ma.variance;
  const double vb = mb.variance;
  if (std::fabs(va - vb) < 1e-9 * (va + vb)) return 0.5 * (ma.mean + mb.mean);
  const double sa = std::sqrt(va);
  const double sb = std::sqrt(vb);
  const double gap = ma.mean - mb.mean;
  // (mean gap)^2 and the variance-ratio log term always share a sign, so the
  // radicand is non-negative; the clamp only absorbs rounding.
  const double radicand = std::max(0.0, gap * gap + 2.0 * (va - vb) * std::log(sa / sb));
  return (sa * sb * std::sqrt(radicand) + va * mb.mean - vb * ma.mean) / (va - vb);
}

ThresholdDetector make_detector(const TwoUserProblem& problem) {
  ThresholdDetector det;
  det.weights = optimal_weights(problem);
  det.threshold = optimal_threshold(problem, det.weights);
  const SumMoments ma = weighted_sum_moments(det.weights, problem.intensity_a);
  const SumMoments mb = weighted_sum_moments(det.weights, problem.intensity_b);
  det.upper = ma.mean >= mb.mean ? Hypothesis::A : Hypothesis::B;
  return det;
}

ThresholdDetector detector_for_weights(const TwoUserProblem& problem,
                                       std::span<const double> weights) {
  validate_problem(problem);
  if (weights.size() != problem.intensity_a.size())
    throw ContractError("detector_for_weights: weights length must equal sector count");
  double norm2 = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w)) throw ContractError("detector_for_weights: weights must be finite");
    norm2 += w * w;
  }
  if (norm2 == 0.0) throw ContractError("detector_for_weights: weights must not be all zero");
  ThresholdDetector det;
  det.weights.assign(weights.begin(), weights.end());
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& w : det.weights) w *= inv;
  det.threshold = optimal_threshold(problem, det.weights);
  const SumMoments ma = weighted_sum_moments(det.weights, problem.intensity_a);
  const SumMoments mb = weighted_sum_moments(det.weights, problem.intensity_b);
  det.upper = ma.mean >= mb.mean ? Hypothesis::A : Hypothesis::B;
  return det;
}

Hypothesis decide(const ThresholdDetector& detector, const PhotonCounts& counts) {
  const double w = weighted_sum(detector.weights, counts);
  const Hypothesis lower = detector.upper == Hypothesis::A ? Hypothesis::B : Hypothesis::A;
  return w >= detector.threshold ? detector.upper : lower;
}

double pe_gaussian(const TwoUserProblem& problem, const ThresholdDetector& detector) {
  validate_problem(problem);
  check_weights(problem, detector.weights);
  const SumMoments ma = weighted_sum_moments(detector.weights, problem.intensity_a);
  const SumMoments mb = weighted_sum_moments(detector.weights, problem.intensity_b);
  const SumMoments& up = ma.mean >= mb.mean ? ma : mb;
  const SumMoments& lo = ma.mean >= mb.mean ? mb : ma;
  const double t = detector.threshold;
  return 0.5 * (q_function((up.mean - t) / std::sqrt(up.variance)) +
                q_function((t - lo.mean) / std::sqrt(lo.variance)));
}

namespace {

double closed_form_exponent(const TwoUserProblem& problem) {
  double g2 = 0.0;
  for (std::size_t m = 0; m < problem.intensity_a.size(); ++m) {
    const double a = problem.intensity_a[m];
    const double b = problem.intensity_b[m];
    g2 += (a - b) * (a - b) / (2.0 * (a + b));
  }
  return std::sqrt(g2);
}

}  // namespace

double pe_threshold_closed_form(const TwoUserProblem& problem) {
  validate_problem(problem);
  return q_function(closed_form_exponent(problem));
}

Hypothesis ml_decide_pair(const TwoUserProblem& problem, const PhotonCounts& counts) {
  validate_problem(problem);
  if (counts.size() != problem.intensity_a.size())
    throw ContractError("ml_decide_pair: counts length must equal sector count");
  double log_ratio = 0.0;  // log L(a) - log L(b); the shared k! terms cancel
  for (std::size_t m = 0; m < counts.size(); ++m) {
    const double a = problem.intensity_a[m];
    const double b = problem.intensity_b[m];
    log_ratio += static_cast<double>(counts[m]) * std::log(a / b) - (a - b);
  }
  return log_ratio >= 0.0 ? Hypothesis::A : Hypothesis::B;
}

double pe_ml_pair(const TwoUserProblem& problem, double epsilon) {
  validate_problem(problem);
  if (!(epsilon > 0.0) || epsilon >= 1.0)
    throw ContractError("pe_ml_pair: epsilon must lie in (0, 1)");
  const std::size_t sectors = problem.intensity_a.size();
  const double tail = epsilon / (2.0 * static_cast<double>(sectors));

  std::vector<int> caps(sectors);
  std::vector<std::vector<double>> pa(sectors), pb(sectors);
  for (std::size_t m = 0; m < sectors; ++m) {
    const double worst = std::max(problem.intensity_a[m], problem.intensity_b[m]);
    caps[m] = detail::poisson_quantile_cap(worst, tail);
    pa[m] = detail::poisson_pmf_table(problem.intensity_a[m], caps[m]);
    pb[m] = detail::poisson_pmf_table(problem.intensity_b[m], caps[m]);
  }
  detail::checked_lattice_size(caps);

  double error = 0.0;
  std::vector<int> point(sectors, 0);
  for (;;) {
    double prod_a = 1.0, prod_b = 1.0;
    for (std::size_t m = 0; m < sectors; ++m) {
      prod_a *= pa[m][point[m]];
      prod_b *= pb[m][point[m]];
    }
    error += 0.5 * std::min(prod_a, prod_b);
    std::size_t m = 0;
    while (m < sectors && ++point[m] > caps[m]) point[m++] = 0;
    if (m == sectors) break;
  }
  return error;
}

double pe_derivative_magnitude(const TwoUserProblem& problem, int sector) {
  validate_problem(problem);
  if (sector < 0 || static_cast<std::size_t>(sector) >= problem.intensity_a.size())
    throw ContractError("pe_derivative_magnitude: sector out of range");
  const double a = problem.intensity_a[static_cast<std::size_t>(sector)];
  const double b = problem.intensity_b[static_cast<std::size_t>(sector)];
  if (a == b) return 0.0;
  const double g = closed_form_exponent(problem);
  const double ratio = 2.0 / (1.0 + a / b);
  const double shape = std::fabs(1.0 - ratio * ratio);
  return std::exp(-0.5 * g * g) / (4.0 * std::sqrt(2.0 * M_PI) * g) * shape;
}

double sensitivity_bound(double c, double d, double delta) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ContractError("sensitivity_bound: c must be positive");
  if (!(d > 0.0) || !std::isfinite(d)) throw ContractError("sensitivity_bound: d must be positive");
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw ContractError("sensitivity_bound: delta must be non-negative");
  const double slope = 3.0 * std::exp(-c / (8.0 * d)) / std::sqrt(2.0 * M_PI * c / d);
  return slope * delta;
}

double div_objective(const TwoUserProblem& problem, std::span<const double> weights) {
  validate_problem(problem);
  if (weights.size() != problem.intensity_a.size())
    throw ContractError("div_objective: weights length must equal sector count");
  double num = 0.0, wa = 0.0, wb = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    const double w = weights[m];
    if (!std::isfinite(w)) throw ContractError("div_objective: weights must be finite");
    num += w * (problem.intensity_a[m] - problem.intensity_b[m]);
    wa += w * w * problem.intensity_a[m];
    wb += w * w * problem.intensity_b[m];
  }
  if (wa == 0.0 && wb == 0.0) throw ContractError("div_objective: weights must not be all zero");
  return num / (std::sqrt(wa) + std::sqrt(wb));
}

double div_lower_bound(const TwoUserProblem& problem, std::span<const double> weights) {
  validate_problem(problem);
  if (weights.size() != problem.intensity_a.size())
    throw ContractError("div_lower_bound: weights length must equal sector count");
  double num = 0.0, wsum = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    const double w = weights[m];
    if (!std::isfinite(w)) throw ContractError("div_lower_bound: weights must be finite");
    num += w * (problem.intensity_a[m] - problem.intensity_b[m]);
    wsum += w * w * (problem.intensity_a[m] + problem.intensity_b[m]);
  }
  if (wsum == 0.0) throw ContractError("div_lower_bound: weights must not be all zero");
  return num / (std::sqrt(2.0) * std::sqrt(wsum));
}

std::string to_json_string(const ThresholdDetector& detector) {
  ordered_json j;
  j["weights"] = detector.weights;
  j["threshold"] = detector.threshold;
  j["orientation"] = detector.upper == Hypothesis::A ? "A" : "B";
  return j.dump(2);
}

ThresholdDetector detector_from_json_string(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("detector JSON: parse failure: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("detector JSON: top level must be an object");
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (key != "weights" && key != "threshold" && key != "orientation")
      throw ConfigError("detector JSON: unknown key '" + key + "'");
  }
  if (!j.contains("weights") || !j["weights"].is_array() || j["weights"].empty())
    throw ConfigError("detector JSON: non-empty array 'weights' required");
  if (!j.contains("threshold") || !j["threshold"].is_number())
    throw ConfigError("detector JSON: number 'threshold' required");
  if (!j.contains("orientation") || !j["orientation"].is_string())
    throw ConfigError("detector JSON: string 'orientation' required");

  ThresholdDetector det;
  double norm2 = 0.0;
  for (const auto& w : j["weights"]) {
    if (!w.is_number()) throw ConfigError("detector JSON: weights must be numbers");
    const double v = w.get<double>();
    if (!std::isfinite(v)) throw ConfigError("detector JSON: weights must be finite");
    det.weights.push_back(v);
    norm2 += v * v;
  }
  if (std::fabs(norm2 - 1.0) > 1e-12)
    throw ConfigError("detector JSON: weights must be unit norm to 1e-12");
  det.threshold = j["threshold"].get<double>();
  if (!std::isfinite(det.threshold)) throw ConfigError("detector JSON: threshold must be finite");
  const std::string orientation = j["orientation"].get<std::string>();
  if (orientation != "A" && orientation != "B")
    throw ConfigError("detector JSON: orientation must be 'A' or 'B'");
  det.upper = orientation == "A" ? Hypothesis::A : Hypothesis::B;
  return det;
}

}  // namespace uvsdma
