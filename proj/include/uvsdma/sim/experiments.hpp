#pragma once

#include "uvsdma/sim/config.hpp"
#include "uvsdma/sim/report.hpp"

namespace uvsdma::sim {

/// Seeded Monte-Carlo experiment drivers. Every report body is a pure
/// function of the resolved config and seed; the thread count only changes
/// wall-clock entries in the runtime section. Draws are addressed by
/// (seed, stream, position) so scheduling never moves randomness around:
/// symbol i of the detection experiments always reads stream i, estimation
/// trial t of table cell c reads stream (1<<56 | c<<32 | t), and detection
/// symbols attached to that trial read stream (2<<56 | c<<32 | index).

/// Samples the weighted sector statistic and compares it against its normal
/// surrogate: histogram, moment check and KS distance per weight set.
Report run_gaussian_fit(const ExperimentConfig& config, int threads);

/// Least-squares estimation table over (stack, pattern, length) cells:
/// closed-form, exact and empirical MSE, normalized MSE/MAE, per-user bias,
/// and optionally the downstream two-user detection error with estimated
/// versus true gains.
Report run_estimation_experiment(const ExperimentConfig& config, int threads);

/// One-of-two selection over a seeded symbol stream: optimal-weight
/// threshold, uniform-weight threshold and exact ML on the same counts, with
/// closed-form references.
Report run_two_user_experiment(const ExperimentConfig& config, int threads);

/// On-off keying against interferers: successive elimination versus exact ML
/// per scenario, with the closed-form error bound and, where enumerable, the
/// exact ML error.
Report run_multiuser_experiment(const ExperimentConfig& config, int threads);

/// Wall-clock comparison of ML and table-driven elimination over the same
/// pregenerated symbols. Decision agreement and error rates are
/// deterministic; every timing figure lives in the runtime section only.
Report run_timing_experiment(const ExperimentConfig& config, int threads);

/// Ranks every non-singular weight pattern by the closed-form estimation
/// MSE summed over the configured sectors.
Report run_pilot_search(const ExperimentConfig& config, int threads);

/// Dispatches on config.kind.
Report run_experiment(const ExperimentConfig& config, int threads);

}  // namespace uvsdma::sim
