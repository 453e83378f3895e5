#include "uvsdma/sim/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uvsdma/channel.hpp"
#include "uvsdma/errors.hpp"
#include "uvsdma/multiuser.hpp"
#include "uvsdma/pilot.hpp"
#include "uvsdma/rng.hpp"
#include "uvsdma/sim/parallel.hpp"
#include "uvsdma/two_user.hpp"

namespace uvsdma::sim {
namespace {

using Json = nlohmann::ordered_json;

// Stream-id spaces. Symbol streams use the bare symbol index so that a
// zero-interferer multiuser run consumes exactly the same uniforms as the
// matching two-user run and reproduces its numbers.
constexpr std::uint64_t kTrialStreamTag = 1ULL << 56;
constexpr std::uint64_t kDetectionStreamTag = 2ULL << 56;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Report make_report(const ExperimentConfig& config) {
  Report report;
  report.kind = config.kind;
  report.name = config.name;
  report.seed = config.seed;
  report.config = config.echo;
  report.runtime = Json::object();
  return report;
}

Metric scalar_metric(std::string name, double value) {
  Metric metric;
  metric.name = std::move(name);
  metric.value = value;
  return metric;
}

Metric mean_metric(std::string name, const Accumulator& accumulator) {
  Metric metric;
  metric.name = std::move(name);
  metric.value = accumulator.mean();
  metric.se = accumulator.standard_error();
  metric.n = accumulator.count;
  return metric;
}

Metric probability_metric(std::string name, const BinaryCounter& counter) {
  Metric metric;
  metric.name = std::move(name);
  metric.value = counter.rate();
  metric.se = counter.standard_error();
  metric.n = counter.trials;
  metric.wilson = wilson_interval(counter.successes, counter.trials);
  return metric;
}

std::vector<double> normalized_weights(const std::vector<double>& raw) {
  double norm_sq = 0.0;
  for (const double w : raw) norm_sq += w * w;
  const double norm = std::sqrt(norm_sq);
  std::vector<double> out(raw.size());
  for (std::size_t m = 0; m < raw.size(); ++m) out[m] = raw[m] / norm;
  return out;
}

Json wilson_cell(const BinaryCounter& counter, bool high) {
  const WilsonInterval interval = wilson_interval(counter.successes, counter.trials);
  return high ? interval.high : interval.low;
}

template <class Payload>
const Payload& payload_of(const ExperimentConfig& config, const char* runner) {
  const Payload* payload = std::get_if<Payload>(&config.payload);
  if (payload == nullptr) {
    throw ContractError(std::string(runner) + ": config kind \"" + config.kind +
                        "\" does not match this experiment");
  }
  return *payload;
}

}  // namespace

Report run_gaussian_fit(const ExperimentConfig& config, int threads) {
  const auto& cfg = payload_of<GaussfitConfig>(config, "run_gaussian_fit");
  const Stopwatch watch;
  Report report = make_report(config);
  report.primary_table = "histogram_w1";

  const std::size_t sets = cfg.weight_sets.size();
  std::vector<std::vector<double>> weights(sets);
  std::vector<SumMoments> theory(sets);
  for (std::size_t w = 0; w < sets; ++w) {
    weights[w] = normalized_weights(cfg.weight_sets[w]);
    theory[w] = weighted_sum_moments(weights[w], cfg.intensity);
  }

  struct Chunk {
    std::vector<Accumulator> stats;
    std::vector<std::vector<double>> values;
  };
  std::vector<Chunk> partials =
      run_chunked<Chunk>(cfg.samples, threads, [&](std::int64_t begin, std::int64_t end) {
        Chunk chunk;
        chunk.stats.resize(sets);
        chunk.values.resize(sets);
        for (auto& values : chunk.values) values.reserve(static_cast<std::size_t>(end - begin));
        for (std::int64_t s = begin; s < end; ++s) {
          CounterRng rng(config.seed, static_cast<std::uint64_t>(s));
          const PhotonCounts counts = sample_counts(cfg.intensity, rng);
          for (std::size_t w = 0; w < sets; ++w) {
            const double value = weighted_sum(weights[w], counts);
            chunk.stats[w].add(value);
            chunk.values[w].push_back(value);
          }
        }
        return chunk;
      });

  std::vector<Accumulator> stats(sets);
  std::vector<std::vector<double>> values(sets);
  for (auto& v : values) v.reserve(static_cast<std::size_t>(cfg.samples));
  for (const Chunk& chunk : partials) {
    for (std::size_t w = 0; w < sets; ++w) {
      stats[w].merge(chunk.stats[w]);
      values[w].insert(values[w].end(), chunk.values[w].begin(), chunk.values[w].end());
    }
  }

  Table weight_table;
  weight_table.name = "weights";
  weight_table.columns = {"set", "sector", "weight_raw", "weight"};
  double ks_max = 0.0;
  for (std::size_t w = 0; w < sets; ++w) {
    const double sd = std::sqrt(theory[w].variance);
    const KsResult ks = ks_against_normal(values[w], theory[w].mean, sd);
    ks_max = std::max(ks_max, ks.distance);
    const std::string suffix = "_w" + std::to_string(w + 1);

    Metric ks_metric = scalar_metric("ks" + suffix, ks.distance);
    ks_metric.se = ks.standard_error;
    ks_metric.n = cfg.samples;
    report.metrics.push_back(ks_metric);
    report.metrics.push_back(mean_metric("mean" + suffix, stats[w]));
    report.metrics.push_back(scalar_metric("mean_theory" + suffix, theory[w].mean));
    Metric var_metric = scalar_metric("var" + suffix, stats[w].sample_variance());
    // Sampling noise of a variance estimate under the surrogate normal.
    var_metric.se = stats[w].sample_variance() *
                    std::sqrt(2.0 / static_cast<double>(std::max<std::int64_t>(1, cfg.samples - 1)));
    var_metric.n = cfg.samples;
    report.metrics.push_back(var_metric);
    report.metrics.push_back(scalar_metric("var_theory" + suffix, theory[w].variance));

    for (std::size_t m = 0; m < weights[w].size(); ++m) {
      weight_table.rows.push_back({static_cast<std::int64_t>(w + 1),
                                   static_cast<std::int64_t>(m + 1), cfg.weight_sets[w][m],
                                   weights[w][m]});
    }

    Table histogram;
    histogram.name = "histogram" + suffix;
    histogram.columns = {"bin_low", "bin_high", "bin_center", "count",
                         "empirical_density", "surrogate_density"};
    const int bins = cfg.histogram_bins;
    const double lo = theory[w].mean - 6.0 * sd;
    const double hi = theory[w].mean + 6.0 * sd;
    const double width = (hi - lo) / bins;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
    for (const double value : values[w]) {
      const auto raw = static_cast<std::int64_t>(std::floor((value - lo) / width));
      const std::int64_t bin = std::clamp<std::int64_t>(raw, 0, bins - 1);
      ++counts[static_cast<std::size_t>(bin)];
    }
    const double n = static_cast<double>(cfg.samples);
    for (int b = 0; b < bins; ++b) {
      const double bin_low = lo + b * width;
      const double center = bin_low + 0.5 * width;
      const double z = (center - theory[w].mean) / sd;
      histogram.rows.push_back({bin_low, bin_low + width, center, counts[static_cast<std::size_t>(b)],
                                static_cast<double>(counts[static_cast<std::size_t>(b)]) / (n * width),
                                normal_pdf(z) / sd});
    }
    report.tables.push_back(std::move(histogram));
  }
  report.metrics.push_back(scalar_metric("ks_max", ks_max));
  report.tables.push_back(std::move(weight_table));

  report.runtime["elapsed_seconds"] = watch.seconds();
  report.runtime["threads"] = resolve_threads(threads);
  return report;
}

Report run_estimation_experiment(const ExperimentConfig& config, int threads) {
  const auto& cfg = payload_of<EstimateConfig>(config, "run_estimation_experiment");
  const Stopwatch watch;
  Report report = make_report(config);
  report.primary_table = "estimates";

  const int users = static_cast<int>(cfg.stacks.front().size());
  const std::size_t pattern_count = cfg.patterns.size();
  const std::size_t length_count = cfg.lengths.size();
  const std::size_t cells = cfg.stacks.size() * pattern_count * length_count;

  const std::int64_t detection_symbols_per_trial =
      cfg.detection ? (cfg.detection->symbols + cfg.trials - 1) / cfg.trials : 0;

  // Static per-cell data, computed once up front: the expanded matrix, its
  // per-slot intensities, closed-form references and the true-gain detector
  // for the optional detection stage.
  struct CellStatic {
    bool singular = false;
    const std::vector<double>* gains = nullptr;
    double noise = 0.0;
    double gain_sq = 0.0;
    double gain_l1 = 0.0;
    double theoretical = 0.0;
    double exact = 0.0;
    AbcCoefficients abc;
    PilotMatrix matrix;
    std::vector<double> intensities;
    bool detection_ok = false;
    double intensity_a = 0.0;
    double intensity_b = 0.0;
    ThresholdDetector ideal;
  };
  std::vector<CellStatic> statics(cells);
  for (std::size_t s = 0; s < cfg.stacks.size(); ++s) {
    for (std::size_t p = 0; p < pattern_count; ++p) {
      for (std::size_t l = 0; l < length_count; ++l) {
        const std::size_t cell = (s * pattern_count + p) * length_count + l;
        CellStatic& data = statics[cell];
        data.gains = &cfg.stacks[s];
        data.noise = cfg.noise[s];
        for (const double g : *data.gains) {
          data.gain_sq += g * g;
          data.gain_l1 += g;
        }
        data.abc = abc_of_pattern(users, cfg.patterns[p]);
        const int length = cfg.lengths[l];
        data.matrix = expand_to_length(users, cfg.patterns[p], length, config.seed);
        try {
          data.theoretical = theoretical_mse(users, length, data.abc, data.noise, data.gain_l1);
          data.exact = exact_mse_trace(data.matrix, *data.gains, data.noise);
        } catch (const SingularError&) {
          data.singular = true;
          continue;
        }
        data.intensities.resize(static_cast<std::size_t>(length));
        for (int slot = 0; slot < length; ++slot) {
          double total = data.noise;
          for (int k = 0; k < users; ++k) {
            if (data.matrix.bit(k, slot)) total += (*data.gains)[static_cast<std::size_t>(k)];
          }
          data.intensities[static_cast<std::size_t>(slot)] = total;
        }
        if (cfg.detection) {
          data.intensity_a = (*data.gains)[static_cast<std::size_t>(cfg.detection->user_a)] + data.noise;
          data.intensity_b = (*data.gains)[static_cast<std::size_t>(cfg.detection->user_b)] + data.noise;
          try {
            data.ideal = make_detector(TwoUserProblem{{data.intensity_a}, {data.intensity_b}});
            data.detection_ok = true;
          } catch (const std::exception&) {
            data.detection_ok = false;  // identical users: detection is undefined
          }
        }
      }
    }
  }

  // Monte-Carlo accumulation per cell, merged in chunk order.
  struct CellPartial {
    Accumulator mse_raw;
    Accumulator mse_norm;
    Accumulator mae_norm;
    std::vector<Accumulator> bias;
    BinaryCounter err_estimated;
    BinaryCounter err_ideal;
    std::int64_t skipped_trials = 0;
  };
  struct Chunk {
    std::size_t first_cell = 0;
    std::vector<CellPartial> cells;
  };

  const std::int64_t total_trials = static_cast<std::int64_t>(cells) * cfg.trials;
  std::vector<Chunk> partials =
      run_chunked<Chunk>(total_trials, threads, [&](std::int64_t begin, std::int64_t end) {
        Chunk chunk;
        chunk.first_cell = static_cast<std::size_t>(begin / cfg.trials);
        const auto last_cell = static_cast<std::size_t>((end - 1) / cfg.trials);
        chunk.cells.resize(last_cell - chunk.first_cell + 1);
        for (auto& partial : chunk.cells) {
          partial.bias.resize(static_cast<std::size_t>(users));
        }
        std::vector<double> counts(1);
        for (std::int64_t g = begin; g < end; ++g) {
          const auto cell = static_cast<std::size_t>(g / cfg.trials);
          const std::int64_t trial = g % cfg.trials;
          const CellStatic& data = statics[cell];
          if (data.singular) continue;
          CellPartial& partial = chunk.cells[cell - chunk.first_cell];

          CounterRng rng(config.seed,
                         kTrialStreamTag | (static_cast<std::uint64_t>(cell) << 32) |
                             static_cast<std::uint64_t>(trial));
          const PhotonCounts slot_counts = sample_counts(data.intensities, rng);
          counts.resize(slot_counts.size());
          for (std::size_t i = 0; i < slot_counts.size(); ++i) {
            counts[i] = static_cast<double>(slot_counts[i]);
          }
          ChannelEstimate estimate = ls_estimate(data.matrix, counts, data.noise);
          if (cfg.clip_negative) {
            for (double& gain : estimate.gains) gain = std::max(0.0, gain);
          }
          double err_sq = 0.0;
          double err_abs = 0.0;
          for (int k = 0; k < users; ++k) {
            const double err =
                estimate.gains[static_cast<std::size_t>(k)] - (*data.gains)[static_cast<std::size_t>(k)];
            err_sq += err * err;
            err_abs += std::abs(err);
            partial.bias[static_cast<std::size_t>(k)].add(err);
          }
          partial.mse_raw.add(err_sq);
          partial.mse_norm.add(err_sq / data.gain_sq);
          partial.mae_norm.add(err_abs / data.gain_l1);

          if (cfg.detection && data.detection_ok) {
            const double est_a = std::max(
                estimate.gains[static_cast<std::size_t>(cfg.detection->user_a)] + data.noise, 1e-12);
            const double est_b = std::max(
                estimate.gains[static_cast<std::size_t>(cfg.detection->user_b)] + data.noise, 1e-12);
            ThresholdDetector fitted;
            bool fitted_ok = true;
            try {
              fitted = make_detector(TwoUserProblem{{est_a}, {est_b}});
            } catch (const std::exception&) {
              fitted_ok = false;  // estimates collided; no detector this trial
              ++partial.skipped_trials;
            }
            if (fitted_ok) {
              for (std::int64_t j = 0; j < detection_symbols_per_trial; ++j) {
                const std::uint64_t index =
                    static_cast<std::uint64_t>(trial) *
                        static_cast<std::uint64_t>(detection_symbols_per_trial) +
                    static_cast<std::uint64_t>(j);
                CounterRng srng(config.seed,
                                kDetectionStreamTag | (static_cast<std::uint64_t>(cell) << 32) | index);
                const bool truth_a = srng.next_double() < 0.5;
                const double intensity = truth_a ? data.intensity_a : data.intensity_b;
                const PhotonCounts symbol = sample_counts(std::span(&intensity, 1), srng);
                const Hypothesis truth = truth_a ? Hypothesis::A : Hypothesis::B;
                partial.err_estimated.add(decide(fitted, symbol) != truth);
                partial.err_ideal.add(decide(data.ideal, symbol) != truth);
              }
            }
          }
        }
        return chunk;
      });

  std::vector<CellPartial> results(cells);
  for (auto& result : results) result.bias.resize(static_cast<std::size_t>(users));
  for (const Chunk& chunk : partials) {
    for (std::size_t i = 0; i < chunk.cells.size(); ++i) {
      CellPartial& into = results[chunk.first_cell + i];
      const CellPartial& from = chunk.cells[i];
      into.mse_raw.merge(from.mse_raw);
      into.mse_norm.merge(from.mse_norm);
      into.mae_norm.merge(from.mae_norm);
      for (int k = 0; k < users; ++k) {
        into.bias[static_cast<std::size_t>(k)].merge(from.bias[static_cast<std::size_t>(k)]);
      }
      into.err_estimated.merge(from.err_estimated);
      into.err_ideal.merge(from.err_ideal);
      into.skipped_trials += from.skipped_trials;
    }
  }

  Table estimates;
  estimates.name = "estimates";
  estimates.columns = {"stack", "pattern", "width", "length", "status", "a", "b", "c",
                       "theoretical_mse", "exact_mse", "empirical_mse", "empirical_mse_se",
                       "mse_norm", "mse_norm_se", "mae_norm", "mae_norm_se",
                       "ser_estimated", "ser_estimated_se", "ser_estimated_low",
                       "ser_estimated_high", "ser_ideal", "ser_ideal_se", "ser_ideal_low",
                       "ser_ideal_high", "detection_skipped_trials"};
  Table bias_table;
  bias_table.name = "bias";
  bias_table.columns = {"stack", "pattern", "length", "user", "bias", "bias_se", "z"};

  std::int64_t singular_cells = 0;
  double max_abs_z = 0.0;
  double max_rel_gap = 0.0;
  for (std::size_t s = 0; s < cfg.stacks.size(); ++s) {
    for (std::size_t p = 0; p < pattern_count; ++p) {
      for (std::size_t l = 0; l < length_count; ++l) {
        const std::size_t cell = (s * pattern_count + p) * length_count + l;
        const CellStatic& data = statics[cell];
        const CellPartial& result = results[cell];
        const std::string name = pattern_name(cfg.patterns[p]);
        const auto width = static_cast<std::int64_t>(pattern_width(users, cfg.patterns[p]));
        std::vector<Json> row = {static_cast<std::int64_t>(s + 1), name, width,
                                 static_cast<std::int64_t>(cfg.lengths[l])};
        if (data.singular) {
          ++singular_cells;
          row.push_back("singular");
          row.insert(row.end(), 20, Json());
          estimates.rows.push_back(std::move(row));
          continue;
        }
        row.push_back("ok");
        row.push_back(data.abc.a.to_double());
        row.push_back(data.abc.b.to_double());
        row.push_back(data.abc.c.to_double());
        row.push_back(data.theoretical);
        row.push_back(data.exact);
        row.push_back(result.mse_raw.mean());
        row.push_back(result.mse_raw.standard_error());
        row.push_back(result.mse_norm.mean());
        row.push_back(result.mse_norm.standard_error());
        row.push_back(result.mae_norm.mean());
        row.push_back(result.mae_norm.standard_error());
        if (cfg.detection && data.detection_ok && result.err_estimated.trials > 0) {
          row.push_back(result.err_estimated.rate());
          row.push_back(result.err_estimated.standard_error());
          row.push_back(wilson_cell(result.err_estimated, false));
          row.push_back(wilson_cell(result.err_estimated, true));
          row.push_back(result.err_ideal.rate());
          row.push_back(result.err_ideal.standard_error());
          row.push_back(wilson_cell(result.err_ideal, false));
          row.push_back(wilson_cell(result.err_ideal, true));
          row.push_back(result.skipped_trials);
        } else {
          row.insert(row.end(), 9, Json());
        }
        estimates.rows.push_back(std::move(row));

        max_rel_gap = std::max(
            max_rel_gap, std::abs(result.mse_raw.mean() - data.exact) / data.exact);
        for (int k = 0; k < users; ++k) {
          const Accumulator& bias = result.bias[static_cast<std::size_t>(k)];
          const double se = bias.standard_error();
          const double z = se > 0.0 ? bias.mean() / se : 0.0;
          max_abs_z = std::max(max_abs_z, std::abs(z));
          bias_table.rows.push_back({static_cast<std::int64_t>(s + 1), name,
                                     static_cast<std::int64_t>(cfg.lengths[l]),
                                     static_cast<std::int64_t>(k + 1), bias.mean(), se, z});
        }
      }
    }
  }

  report.metrics.push_back(scalar_metric("cells", static_cast<double>(cells)));
  report.metrics.push_back(scalar_metric("singular_cells", static_cast<double>(singular_cells)));
  Metric gap = scalar_metric("max_mse_rel_gap", max_rel_gap);
  gap.n = cfg.trials;
  report.metrics.push_back(gap);
  Metric z_metric = scalar_metric("max_abs_bias_z", max_abs_z);
  z_metric.n = cfg.trials;
  report.metrics.push_back(z_metric);
  report.tables.push_back(std::move(estimates));
  report.tables.push_back(std::move(bias_table));

  report.runtime["elapsed_seconds"] = watch.seconds();
  report.runtime["threads"] = resolve_threads(threads);
  return report;
}

Report run_two_user_experiment(const ExperimentConfig& config, int threads) {
  const auto& cfg = payload_of<Detect2Config>(config, "run_two_user_experiment");
  const Stopwatch watch;
  Report report = make_report(config);

  const std::size_t sectors = cfg.gains_a.size();
  TwoUserProblem problem;
  problem.intensity_a.resize(sectors);
  problem.intensity_b.resize(sectors);
  for (std::size_t m = 0; m < sectors; ++m) {
    problem.intensity_a[m] = cfg.gains_a[m] + cfg.noise[m];
    problem.intensity_b[m] = cfg.gains_b[m] + cfg.noise[m];
  }
  validate_problem(problem);
  const ThresholdDetector optimal = make_detector(problem);
  const ThresholdDetector uniform =
      detector_for_weights(problem, std::vector<double>(sectors, 1.0));

  struct Chunk {
    BinaryCounter err_optimal;
    BinaryCounter err_uniform;
    BinaryCounter err_ml;
    BinaryCounter agree;
  };
  std::vector<Chunk> partials =
      run_chunked<Chunk>(cfg.symbols, threads, [&](std::int64_t begin, std::int64_t end) {
        Chunk chunk;
        for (std::int64_t i = begin; i < end; ++i) {
          CounterRng rng(config.seed, static_cast<std::uint64_t>(i));
          const bool truth_a = rng.next_double() < 0.5;
          const Hypothesis truth = truth_a ? Hypothesis::A : Hypothesis::B;
          const PhotonCounts counts =
              sample_counts(truth_a ? problem.intensity_a : problem.intensity_b, rng);
          const Hypothesis d_optimal = decide(optimal, counts);
          const Hypothesis d_uniform = decide(uniform, counts);
          const Hypothesis d_ml = ml_decide_pair(problem, counts);
          chunk.err_optimal.add(d_optimal != truth);
          chunk.err_uniform.add(d_uniform != truth);
          chunk.err_ml.add(d_ml != truth);
          chunk.agree.add(d_optimal == d_ml);
        }
        return chunk;
      });
  Chunk total;
  for (const Chunk& chunk : partials) {
    total.err_optimal.merge(chunk.err_optimal);
    total.err_uniform.merge(chunk.err_uniform);
    total.err_ml.merge(chunk.err_ml);
    total.agree.merge(chunk.agree);
  }

  report.metrics.push_back(probability_metric("ser_optimal", total.err_optimal));
  report.metrics.push_back(probability_metric("ser_uniform", total.err_uniform));
  report.metrics.push_back(probability_metric("ser_ml", total.err_ml));
  report.metrics.push_back(probability_metric("agreement_optimal_ml", total.agree));
  report.metrics.push_back(
      scalar_metric("pe_threshold_closed_form", pe_threshold_closed_form(problem)));
  report.metrics.push_back(scalar_metric("pe_gaussian_optimal", pe_gaussian(problem, optimal)));
  report.metrics.push_back(scalar_metric("pe_gaussian_uniform", pe_gaussian(problem, uniform)));
  try {
    report.metrics.push_back(scalar_metric("pe_ml_exact", pe_ml_pair(problem)));
  } catch (const UnsupportedError&) {
    // Lattice too large to enumerate; the metric is simply absent.
  }

  Table detectors;
  detectors.name = "detectors";
  detectors.columns = {"detector", "sector", "weight", "threshold", "upper"};
  for (std::size_t m = 0; m < sectors; ++m) {
    detectors.rows.push_back({"optimal", static_cast<std::int64_t>(m + 1), optimal.weights[m],
                              optimal.threshold, optimal.upper == Hypothesis::A ? "A" : "B"});
  }
  for (std::size_t m = 0; m < sectors; ++m) {
    detectors.rows.push_back({"uniform", static_cast<std::int64_t>(m + 1), uniform.weights[m],
                              uniform.threshold, uniform.upper == Hypothesis::A ? "A" : "B"});
  }
  report.tables.push_back(std::move(detectors));

  report.runtime["elapsed_seconds"] = watch.seconds();
  report.runtime["threads"] = resolve_threads(threads);
  return report;
}

namespace {

struct MultiChunk {
  BinaryCounter err_elimination;
  BinaryCounter err_ml;
  BinaryCounter agree;
};

/// Shared symbol loop of the multiuser experiments: draws the desired bit,
/// then each interferer bit, then the sector counts, and runs both decoders.
MultiChunk multiuser_symbols(const HypothesisSets& hypotheses, const PairwiseTable& table,
                             ProbeOrder order, std::uint64_t seed, std::int64_t begin,
                             std::int64_t end, int interferer_count) {
  MultiChunk chunk;
  for (std::int64_t i = begin; i < end; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const int truth = rng.next_double() < 0.5 ? 1 : 0;
    int mode = 0;
    for (int k = 0; k < interferer_count; ++k) {
      if (rng.next_double() < 0.5) mode |= 1 << k;
    }
    const auto& intensity = truth == 1 ? hypotheses.on[static_cast<std::size_t>(mode)]
                                       : hypotheses.off[static_cast<std::size_t>(mode)];
    const PhotonCounts counts = sample_counts(intensity, rng);
    const int d_elimination = successive_elimination(table, counts, order);
    const int d_ml = ml_decide_multi(hypotheses, counts);
    chunk.err_elimination.add(d_elimination != truth);
    chunk.err_ml.add(d_ml != truth);
    chunk.agree.add(d_elimination == d_ml);
  }
  return chunk;
}

}  // namespace

Report run_multiuser_experiment(const ExperimentConfig& config, int threads) {
  const auto& cfg = payload_of<MultiuserConfig>(config, "run_multiuser_experiment");
  const Stopwatch watch;
  Report report = make_report(config);
  report.primary_table = "scenarios";

  Table scenarios;
  scenarios.name = "scenarios";
  scenarios.columns = {"scenario", "interferer_count", "sectors", "symbols",
                       "ser_elimination", "ser_elimination_se", "ser_elimination_low",
                       "ser_elimination_high", "ser_ml", "ser_ml_se", "ser_ml_low",
                       "ser_ml_high", "agreement", "agreement_se", "pe_ml_exact",
                       "pe_upper_bound", "degenerate_pairs"};
  Json build_seconds = Json::array();

  for (std::size_t j = 0; j < cfg.scenarios.size(); ++j) {
    const InterferenceScenario& scenario = cfg.scenarios[j];
    const PairwiseTable table = build_pairwise_table(scenario);
    const HypothesisSets hypotheses = build_hypotheses(scenario);
    const int interferer_count = static_cast<int>(scenario.interferers.size());
    build_seconds.push_back(table.build_seconds);

    std::vector<MultiChunk> partials = run_chunked<MultiChunk>(
        cfg.symbols, threads, [&](std::int64_t begin, std::int64_t end) {
          return multiuser_symbols(hypotheses, table, cfg.probe_order, config.seed, begin, end,
                                   interferer_count);
        });
    MultiChunk total;
    for (const MultiChunk& chunk : partials) {
      total.err_elimination.merge(chunk.err_elimination);
      total.err_ml.merge(chunk.err_ml);
      total.agree.merge(chunk.agree);
    }

    std::optional<double> pe_ml;
    try {
      pe_ml = pe_ml_multi(hypotheses);
    } catch (const UnsupportedError&) {
      // Lattice too large to enumerate exactly.
    }
    const double pe_upper = pe_upper_bound(scenario);
    std::int64_t degenerate_pairs = 0;
    for (const std::uint8_t flag : table.degenerate) degenerate_pairs += flag != 0 ? 1 : 0;

    const std::string suffix = "_s" + std::to_string(j + 1);
    report.metrics.push_back(probability_metric("ser_elimination" + suffix, total.err_elimination));
    report.metrics.push_back(probability_metric("ser_ml" + suffix, total.err_ml));
    report.metrics.push_back(probability_metric("agreement" + suffix, total.agree));
    if (pe_ml) report.metrics.push_back(scalar_metric("pe_ml_exact" + suffix, *pe_ml));
    report.metrics.push_back(scalar_metric("pe_upper_bound" + suffix, pe_upper));

    scenarios.rows.push_back(
        {static_cast<std::int64_t>(j + 1), static_cast<std::int64_t>(interferer_count),
         static_cast<std::int64_t>(scenario.desired.size()), cfg.symbols,
         total.err_elimination.rate(), total.err_elimination.standard_error(),
         wilson_cell(total.err_elimination, false), wilson_cell(total.err_elimination, true),
         total.err_ml.rate(), total.err_ml.standard_error(), wilson_cell(total.err_ml, false),
         wilson_cell(total.err_ml, true), total.agree.rate(), total.agree.standard_error(),
         pe_ml ? Json(*pe_ml) : Json(), pe_upper, degenerate_pairs});

    report.artifacts.emplace_back("pairwise_s" + std::to_string(j + 1) + ".json",
                                  to_json_string(table));
  }
  report.tables.push_back(std::move(scenarios));

  report.runtime["elapsed_seconds"] = watch.seconds();
  report.runtime["threads"] = resolve_threads(threads);
  report.runtime["table_build_seconds"] = build_seconds;
  return report;
}

Report run_timing_experiment(const ExperimentConfig& config, int threads) {
  const auto& cfg = payload_of<TimingConfig>(config, "run_timing_experiment");
  const Stopwatch watch;
  Report report = make_report(config);
  report.primary_table = "scenarios";

  Table scenarios;
  scenarios.name = "scenarios";
  scenarios.columns = {"scenario", "interferer_count", "symbols", "repetitions",
                       "agreement", "agreement_se", "agreement_low", "agreement_high",
                       "ser_elimination", "ser_elimination_se", "ser_ml", "ser_ml_se"};
  Json timing = Json::array();

  for (std::size_t j = 0; j < cfg.scenarios.size(); ++j) {
    const InterferenceScenario& scenario = cfg.scenarios[j];
    const PairwiseTable table = build_pairwise_table(scenario);
    const HypothesisSets hypotheses = build_hypotheses(scenario);
    const int interferer_count = static_cast<int>(scenario.interferers.size());

    // Pregenerated symbol stream; the timed loops replay it.
    struct Chunk {
      std::vector<PhotonCounts> counts;
      std::vector<std::uint8_t> truth;
    };
    std::vector<Chunk> partials =
        run_chunked<Chunk>(cfg.symbols, threads, [&](std::int64_t begin, std::int64_t end) {
          Chunk chunk;
          chunk.counts.reserve(static_cast<std::size_t>(end - begin));
          chunk.truth.reserve(static_cast<std::size_t>(end - begin));
          for (std::int64_t i = begin; i < end; ++i) {
            CounterRng rng(config.seed, static_cast<std::uint64_t>(i));
            const int truth = rng.next_double() < 0.5 ? 1 : 0;
            int mode = 0;
            for (int k = 0; k < interferer_count; ++k) {
              if (rng.next_double() < 0.5) mode |= 1 << k;
            }
            const auto& intensity = truth == 1 ? hypotheses.on[static_cast<std::size_t>(mode)]
                                               : hypotheses.off[static_cast<std::size_t>(mode)];
            chunk.counts.push_back(sample_counts(intensity, rng));
            chunk.truth.push_back(static_cast<std::uint8_t>(truth));
          }
          return chunk;
        });
    std::vector<PhotonCounts> counts;
    std::vector<std::uint8_t> truth;
    counts.reserve(static_cast<std::size_t>(cfg.symbols));
    truth.reserve(static_cast<std::size_t>(cfg.symbols));
    for (Chunk& chunk : partials) {
      std::move(chunk.counts.begin(), chunk.counts.end(), std::back_inserter(counts));
      truth.insert(truth.end(), chunk.truth.begin(), chunk.truth.end());
    }

    BinaryCounter err_elimination;
    BinaryCounter err_ml;
    BinaryCounter agree;
    std::int64_t ml_sum = 0;
    std::int64_t elimination_sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const int d_ml = ml_decide_multi(hypotheses, counts[i]);
      const int d_elimination = successive_elimination(table, counts[i], ProbeOrder::Ascending);
      ml_sum += d_ml;
      elimination_sum += d_elimination;
      err_ml.add(d_ml != truth[i]);
      err_elimination.add(d_elimination != truth[i]);
      agree.add(d_ml == d_elimination);
    }

    // Timed replays, single threaded. The decision checksums must reproduce
    // the reference pass, which also keeps the loops from being elided.
    std::vector<double> t_ml;
    std::vector<double> t_elimination;
    std::vector<double> ratios;
    for (int rep = 0; rep < cfg.warmup + cfg.repetitions; ++rep) {
      std::int64_t check_ml = 0;
      const Stopwatch ml_watch;
      for (const PhotonCounts& c : counts) check_ml += ml_decide_multi(hypotheses, c);
      const double ml_seconds = ml_watch.seconds();

      std::int64_t check_elimination = 0;
      const Stopwatch elimination_watch;
      for (const PhotonCounts& c : counts) {
        check_elimination += successive_elimination(table, c, ProbeOrder::Ascending);
      }
      const double elimination_seconds = elimination_watch.seconds();

      if (check_ml != ml_sum || check_elimination != elimination_sum) {
        throw std::logic_error("timing replay diverged from the reference decisions");
      }
      if (rep >= cfg.warmup) {
        t_ml.push_back(ml_seconds);
        t_elimination.push_back(elimination_seconds);
        ratios.push_back(ml_seconds / elimination_seconds);
      }
    }

    const std::string suffix = "_s" + std::to_string(j + 1);
    report.metrics.push_back(probability_metric("agreement" + suffix, agree));
    report.metrics.push_back(probability_metric("ser_elimination" + suffix, err_elimination));
    report.metrics.push_back(probability_metric("ser_ml" + suffix, err_ml));

    scenarios.rows.push_back(
        {static_cast<std::int64_t>(j + 1), static_cast<std::int64_t>(interferer_count),
         cfg.symbols, static_cast<std::int64_t>(cfg.repetitions), agree.rate(),
         agree.standard_error(), wilson_cell(agree, false), wilson_cell(agree, true),
         err_elimination.rate(), err_elimination.standard_error(), err_ml.rate(),
         err_ml.standard_error()});

    Json entry;
    entry["scenario"] = j + 1;
    entry["interferer_count"] = interferer_count;
    entry["table_build_seconds"] = table.build_seconds;
    entry["t_ml_seconds"] = {{"median", median_of(t_ml)},
                             {"min", *std::min_element(t_ml.begin(), t_ml.end())},
                             {"max", *std::max_element(t_ml.begin(), t_ml.end())}};
    entry["t_elimination_seconds"] = {
        {"median", median_of(t_elimination)},
        {"min", *std::min_element(t_elimination.begin(), t_elimination.end())},
        {"max", *std::max_element(t_elimination.begin(), t_elimination.end())}};
    entry["ratio_ml_over_elimination"] = {{"median", median_of(ratios)},
                                          {"min", *std::min_element(ratios.begin(), ratios.end())},
                                          {"max", *std::max_element(ratios.begin(), ratios.end())}};
    timing.push_back(entry);
  }
  report.tables.push_back(std::move(scenarios));

  report.runtime["elapsed_seconds"] = watch.seconds();
  report.runtime["threads"] = resolve_threads(threads);
  report.runtime["timing"] = timing;
  return report;
}

Report run_pilot_search(const ExperimentConfig& config, int threads) {
  const auto& cfg = payload_of<PilotSearchConfig>(config, "run_pilot_search");
  (void)threads;  // closed-form evaluation; nothing to distribute
  const Stopwatch watch;
  Report report = make_report(config);
  report.primary_table = "patterns";

  const std::size_t sectors = cfg.sector_sums.size();
  struct Row {
    WeightPattern pattern;
    std::uint64_t width = 0;
    AbcCoefficients abc;
    std::vector<double> f;
    double aggregate = 0.0;
  };
  std::vector<Row> rows;
  Table excluded;
  excluded.name = "excluded";
  excluded.columns = {"pattern", "width", "reason"};

  std::vector<WeightPattern> candidates;
  for (int size = 1; size <= cfg.users; ++size) {
    std::vector<int> combo(static_cast<std::size_t>(size));
    std::iota(combo.begin(), combo.end(), 1);
    while (true) {
      candidates.push_back(make_pattern(combo, cfg.users));
      int i = size - 1;
      while (i >= 0 && combo[static_cast<std::size_t>(i)] == cfg.users - (size - 1 - i)) --i;
      if (i < 0) break;
      ++combo[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < size; ++j) {
        combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
  }
  for (const WeightPattern& pattern : candidates) {
    Row row;
    row.pattern = pattern;
    row.width = pattern_width(cfg.users, pattern);
    row.abc = abc_of_pattern(cfg.users, pattern);
    if (row.abc.a == row.abc.b) {
      excluded.rows.push_back(
          {pattern_name(pattern), static_cast<std::int64_t>(row.width), "singular"});
      continue;
    }
    for (std::size_t m = 0; m < sectors; ++m) {
      row.f.push_back(
          theoretical_mse(cfg.users, cfg.length, row.abc, cfg.noise[m], cfg.sector_sums[m]));
      row.aggregate += row.f.back();
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    if (x.aggregate != y.aggregate) return x.aggregate < y.aggregate;
    if (x.width != y.width) return x.width < y.width;
    return x.pattern.weights < y.pattern.weights;
  });

  Table patterns;
  patterns.name = "patterns";
  patterns.columns = {"rank", "pattern", "width", "a", "b", "c"};
  for (std::size_t m = 1; m <= sectors; ++m) patterns.columns.push_back("f_" + std::to_string(m));
  patterns.columns.push_back("f_aggregate");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Row& row = rows[r];
    std::vector<Json> cells = {static_cast<std::int64_t>(r + 1), pattern_name(row.pattern),
                               static_cast<std::int64_t>(row.width), row.abc.a.to_double(),
                               row.abc.b.to_double(), row.abc.c.to_double()};
    for (const double f : row.f) cells.push_back(f);
    cells.push_back(row.aggregate);
    patterns.rows.push_back(std::move(cells));
  }
  report.tables.push_back(std::move(patterns));
  report.tables.push_back(std::move(excluded));

  report.metrics.push_back(scalar_metric("patterns_total", static_cast<double>(candidates.size())));
  report.metrics.push_back(scalar_metric("patterns_ranked", static_cast<double>(rows.size())));
  report.metrics.push_back(
      scalar_metric("patterns_excluded", static_cast<double>(candidates.size() - rows.size())));

  report.runtime["elapsed_seconds"] = watch.seconds();
  return report;
}

Report run_experiment(const ExperimentConfig& config, int threads) {
  if (config.kind == "gaussfit") return run_gaussian_fit(config, threads);
  if (config.kind == "estimate") return run_estimation_experiment(config, threads);
  if (config.kind == "detect2") return run_two_user_experiment(config, threads);
  if (config.kind == "multiuser") return run_multiuser_experiment(config, threads);
  if (config.kind == "timing") return run_timing_experiment(config, threads);
  if (config.kind == "pilot-search") return run_pilot_search(config, threads);
  throw ContractError("run_experiment: unknown kind \"" + config.kind + "\"");
}

}  // namespace uvsdma::sim
