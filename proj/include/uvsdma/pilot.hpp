#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uvsdma {

/// Exact rational with reduced int64 numerator/denominator, denominator > 0.
/// Used for the column-fraction coefficients of balanced pilot matrices so
/// that equality tests (notably a == b, the singular case) are exact.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Ratio() = default;
  Ratio(std::int64_t numerator, std::int64_t denominator);

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Ratio& x, const Ratio& y) {
    return x.num == y.num && x.den == y.den;
  }
  friend bool operator!=(const Ratio& x, const Ratio& y) { return !(x == y); }
  friend bool operator<(const Ratio& x, const Ratio& y);
};

/// Exact binomial coefficient; zero when k < 0, n < 0 or k > n.
/// Guarded for n <= 62 so every value fits in 64 bits.
std::uint64_t binom(int n, int k);

/// Aggregate pattern of column weights: a set of distinct weights in
/// [1, users], kept sorted ascending. Written {1,4} and the like in output.
struct WeightPattern {
  std::vector<int> weights;
};

/// Validates distinct weights in [1, users]; returns the sorted pattern.
WeightPattern make_pattern(std::vector<int> weights, int users);

/// "{1,4}" style display form.
std::string pattern_name(const WeightPattern& pattern);

/// Provenance of a matrix built from a pattern; lets the estimator take the
/// structured closed-form path and lets serialization stay compact.
struct PatternOrigin {
  WeightPattern pattern;
  std::uint64_t seed = 0;
  bool truncated = false;  // true when columns were deleted to reach length
};

/// Binary pilot schedule: bit (user, slot) says whether that user transmits
/// its pilot in that slot.
struct PilotMatrix {
  int users = 0;
  int length = 0;
  std::vector<std::uint8_t> bits;  // row-major, users x length, values 0/1
  std::optional<PatternOrigin> origin;

  bool bit(int user, int slot) const {
    return bits[static_cast<std::size_t>(user) * length + slot] != 0;
  }
};

/// All weight-`weight` binary columns over `users` rows, ordered
/// lexicographically by support set. Width is binom(users, weight).
PilotMatrix basic_matrix(int users, int weight);

/// Horizontal concatenation of the basic matrices for each weight in the
/// pattern, ascending. Width is the sum of the per-weight widths.
PilotMatrix concat_pattern(int users, const WeightPattern& pattern);

/// Number of slot columns of the pattern's concatenated matrix.
std::uint64_t pattern_width(int users, const WeightPattern& pattern);

/// Repeats the pattern's concatenated matrix whole-block until it covers
/// `length` columns, then deletes the excess from the final block, choosing
/// the deleted columns uniformly at random with the given seed.
PilotMatrix expand_to_length(int users, const WeightPattern& pattern, int length,
                             std::uint64_t seed);

/// Number of columns whose support contains every row index in `rows`
/// (distinct 0-based indices).
std::uint64_t zeta(const PilotMatrix& matrix, std::span<const int> rows);

/// Exhaustive check that zeta depends only on |rows| for every non-empty row
/// subset. Exponential in users; refuses users > 20.
bool is_balanced(const PilotMatrix& matrix);

/// Fractions of columns covering any fixed single row (a), row pair (b) and
/// row triple (c). For users < 3 the undefined higher orders are zero.
struct AbcCoefficients {
  Ratio a;
  Ratio b;
  Ratio c;
};

/// Closed-form coefficients of a pattern's concatenated matrix:
/// a = sum_s binom(users-1, w_s-1) / width, and similarly shifted for b, c.
AbcCoefficients abc_of_pattern(int users, const WeightPattern& pattern);

/// Coefficients measured by direct counting. Throws ContractError when the
/// counts are not constant across rows, pairs or triples (matrix unbalanced).
AbcCoefficients abc_of_matrix(const PilotMatrix& matrix);

/// Per-user mean-gain estimate for one detector sector.
struct ChannelEstimate {
  std::vector<double> gains;
  int sector = 0;
};

/// Least-squares estimate (X X^T)^{-1} X (u - noise_mean) from per-slot
/// counts (or averaged counts) of one sector. Matrices with an untruncated
/// pattern origin take the exact structured inverse; anything else is solved
/// by elimination. Throws SingularError when X X^T is singular.
ChannelEstimate ls_estimate(const PilotMatrix& matrix, std::span<const double> counts,
                            double noise_mean);

/// Exact mean squared error of ls_estimate under the true per-user gains
/// and noise mean for one sector: sum_l w_l ||(X X^T)^{-1} x_l||^2 +
/// noise_mean * trace((X X^T)^{-1}) with w_l the column's true intensity.
double exact_mse_trace(const PilotMatrix& matrix, std::span<const double> gains,
                       double noise_mean);

/// Closed-form mean squared error of the least-squares estimator for a
/// balanced matrix with the given coefficients, schedule length, sector
/// noise mean and total per-sector gain sum_k gains[k].
double theoretical_mse(int users, int length, const AbcCoefficients& abc, double noise_mean,
                       double gain_l1);

/// One candidate pattern with its coefficients and closed-form MSE.
struct PatternScore {
  WeightPattern pattern;
  AbcCoefficients abc;
  double mse = 0.0;
};

/// Every non-singular weight pattern for `users` ranked by theoretical_mse
/// ascending; ties break toward smaller width, then lexicographic weights.
/// Patterns with a == b (singular normal matrix) are excluded.
/// Refuses users > 20 (the search is exponential in users).
std::vector<PatternScore> optimize_pattern(int users, int length, double noise_mean,
                                           double gain_l1);

/// Compact JSON form: {"K", "L", "rows", and for pattern-born matrices
/// "beta" and "seed"}. Rows are "0101..." strings.
std::string to_json_string(const PilotMatrix& matrix);

/// Parses and fully validates the JSON form, including re-deriving
/// pattern-born bits from ("beta", "seed") and checking they match.
/// Throws ConfigError on any mismatch.
PilotMatrix pilot_matrix_from_json_string(const std::string& text);

}  // namespace uvsdma
