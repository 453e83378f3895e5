#include "uvsdma/pilot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "uvsdma/errors.hpp"
#include "uvsdma/linalg.hpp"
#include "uvsdma/rng.hpp"

namespace uvsdma {

using ordered_json = nlohmann::ordered_json;

Ratio::Ratio(std::int64_t numerator, std::int64_t denominator) {
  if (denominator == 0) throw ContractError("ratio: zero denominator");
  if (denominator < 0) {
    numerator = -numerator;
    denominator = -denominator;
  }
  const std::int64_t g = std::gcd(std::llabs(numerator), denominator);
  num = g ? numerator / g : numerator;
  den = g ? denominator / g : denominator;
}

bool operator<(const Ratio& x, const Ratio& y) {
  return static_cast<__int128>(x.num) * y.den < static_cast<__int128>(y.num) * x.den;
}

std::uint64_t binom(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (n > 62) throw UnsupportedError("binom: n above 62 would overflow 64 bits");
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    // Exact at every step: r * (n - k + i) is divisible by i.
    r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  }
  return r;
}

WeightPattern make_pattern(std::vector<int> weights, int users) {
  if (users < 1) throw ContractError("pattern: users must be positive");
  if (weights.empty()) throw ContractError("pattern: at least one weight required");
  std::sort(weights.begin(), weights.end());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 1 || weights[i] > users)
      throw ContractError("pattern: weights must lie in [1, users]");
    if (i > 0 && weights[i] == weights[i - 1])
      throw ContractError("pattern: weights must be distinct");
  }
  return WeightPattern{std::move(weights)};
}

std::string pattern_name(const WeightPattern& pattern) {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < pattern.weights.size(); ++i) {
    if (i) out << ',';
    out << pattern.weights[i];
  }
  out << '}';
  return out.str();
}

namespace {

constexpr int kMaxUsersExhaustive = 20;

void append_weight_columns(PilotMatrix& matrix, int users, int weight, std::int64_t& next_column) {
  // Lexicographic enumeration of all size-`weight` supports.
  std::vector<int> support(weight);
  std::iota(support.begin(), support.end(), 0);
  for (;;) {
    for (int row : support)
      matrix.bits[static_cast<std::size_t>(row) * matrix.length + next_column] = 1;
    ++next_column;
    int i = weight - 1;
    while (i >= 0 && support[i] == users - weight + i) --i;
    if (i < 0) break;
    ++support[i];
    for (int j = i + 1; j < weight; ++j) support[j] = support[j - 1] + 1;
  }
}

std::uint64_t checked_width(int users, const WeightPattern& pattern) {
  std::uint64_t width = 0;
  for (int w : pattern.weights) width += binom(users, w);
  if (width > 4'000'000) throw UnsupportedError("pattern width exceeds the 4e6 column limit");
  return width;
}

}  // namespace

PilotMatrix basic_matrix(int users, int weight) {
  return concat_pattern(users, make_pattern({weight}, users));
}

PilotMatrix concat_pattern(int users, const WeightPattern& pattern) {
  const WeightPattern p = make_pattern(pattern.weights, users);
  const std::uint64_t width = checked_width(users, p);
  PilotMatrix matrix;
  matrix.users = users;
  matrix.length = static_cast<int>(width);
  matrix.bits.assign(static_cast<std::size_t>(users) * width, 0);
  std::int64_t column = 0;
  for (int w : p.weights) append_weight_columns(matrix, users, w, column);
  matrix.origin = PatternOrigin{p, 0, false};
  return matrix;
}

std::uint64_t pattern_width(int users, const WeightPattern& pattern) {
  return checked_width(users, make_pattern(pattern.weights, users));
}

PilotMatrix expand_to_length(int users, const WeightPattern& pattern, int length,
                             std::uint64_t seed) {
  if (length < 1) throw ContractError("expand_to_length: length must be positive");
  const PilotMatrix block = concat_pattern(users, pattern);
  const int width = block.length;
  const std::int64_t reps = (static_cast<std::int64_t>(length) + width - 1) / width;
  const std::int64_t total = reps * width;
  if (total > 4'000'000) throw UnsupportedError("expand_to_length: expanded width exceeds 4e6");
  const int drop = static_cast<int>(total - length);

  // Pick the deleted final-block columns by a partial shuffle so each
  // drop-subset is equally likely and fully determined by the seed.
  std::vector<char> keep(static_cast<std::size_t>(width), 1);
  if (drop > 0) {
    CounterRng rng(seed, 0);
    std::vector<int> order(static_cast<std::size_t>(width));
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < drop; ++i) {
      const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(width - i)));
      std::swap(order[i], order[j]);
      keep[order[i]] = 0;
    }
  }

  PilotMatrix matrix;
  matrix.users = users;
  matrix.length = length;
  matrix.bits.assign(static_cast<std::size_t>(users) * length, 0);
  int out = 0;
  for (std::int64_t rep = 0; rep < reps; ++rep) {
    const bool last = rep == reps - 1;
    for (int c = 0; c < width; ++c) {
      if (last && !keep[c]) continue;
      for (int r = 0; r < users; ++r)
        matrix.bits[static_cast<std::size_t>(r) * length + out] =
            block.bits[static_cast<std::size_t>(r) * width + c];
      ++out;
    }
  }
  matrix.origin = PatternOrigin{block.origin->pattern, seed, drop > 0};
  return matrix;
}

std::uint64_t zeta(const PilotMatrix& matrix, std::span<const int> rows) {
  if (rows.empty()) throw ContractError("zeta: row subset must be non-empty");
  std::vector<int> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= matrix.users)
      throw ContractError("zeta: row index out of range");
    if (i > 0 && sorted[i] == sorted[i - 1]) throw ContractError("zeta: row indices must be distinct");
  }
  std::uint64_t count = 0;
  for (int l = 0; l < matrix.length; ++l) {
    bool covered = true;
    for (int r : sorted)
      if (!matrix.bit(r, l)) {
        covered = false;
        break;
      }
    count += covered;
  }
  return count;
}

bool is_balanced(const PilotMatrix& matrix) {
  if (matrix.users > kMaxUsersExhaustive)
    throw UnsupportedError("is_balanced: exhaustive check limited to 20 users");
  for (int size = 1; size <= matrix.users; ++size) {
    std::vector<int> subset(static_cast<std::size_t>(size));
    std::iota(subset.begin(), subset.end(), 0);
    bool first = true;
    std::uint64_t reference = 0;
    for (;;) {
      const std::uint64_t count = zeta(matrix, subset);
      if (first) {
        reference = count;
        first = false;
      } else if (count != reference) {
        return false;
      }
      int i = size - 1;
      while (i >= 0 && subset[i] == matrix.users - size + i) --i;
      if (i < 0) break;
      ++subset[i];
      for (int j = i + 1; j < size; ++j) subset[j] = subset[j - 1] + 1;
    }
  }
  return true;
}

AbcCoefficients abc_of_pattern(int users, const WeightPattern& pattern) {
  const WeightPattern p = make_pattern(pattern.weights, users);
  std::int64_t w = 0, na = 0, nb = 0, nc = 0;
  for (int s : p.weights) {
    w += static_cast<std::int64_t>(binom(users, s));
    na += static_cast<std::int64_t>(binom(users - 1, s - 1));
    nb += static_cast<std::int64_t>(binom(users - 2, s - 2));
    nc += static_cast<std::int64_t>(binom(users - 3, s - 3));
  }
  return AbcCoefficients{Ratio(na, w), Ratio(nb, w), Ratio(nc, w)};
}

AbcCoefficients abc_of_matrix(const PilotMatrix& matrix) {
  const int users = matrix.users;
  const int length = matrix.length;
  if (users < 1 || length < 1) throw ContractError("abc_of_matrix: empty matrix");

  auto constant_count = [&](int size) -> std::uint64_t {
    std::vector<int> subset(static_cast<std::size_t>(size));
    std::iota(subset.begin(), subset.end(), 0);
    bool first = true;
    std::uint64_t reference = 0;
    for (;;) {
      const std::uint64_t count = zeta(matrix, subset);
      if (first) {
        reference = count;
        first = false;
      } else if (count != reference) {
        throw ContractError("abc_of_matrix: coverage counts vary across row subsets of size " +
                            std::to_string(size) + "; matrix is not balanced");
      }
      int i = size - 1;
      while (i >= 0 && subset[i] == users - size + i) --i;
      if (i < 0) break;
      ++subset[i];
      for (int j = i + 1; j < size; ++j) subset[j] = subset[j - 1] + 1;
    }
    return reference;
  };

  AbcCoefficients abc;
  abc.a = Ratio(static_cast<std::int64_t>(constant_count(1)), length);
  abc.b = users >= 2 ? Ratio(static_cast<std::int64_t>(constant_count(2)), length) : Ratio(0, 1);
  abc.c = users >= 3 ? Ratio(static_cast<std::int64_t>(constant_count(3)), length) : Ratio(0, 1);
  return abc;
}

namespace {

std::vector<double> normal_rhs(const PilotMatrix& matrix, std::span<const double> counts,
                               double noise_mean) {
  std::vector<double> rhs(static_cast<std::size_t>(matrix.users), 0.0);
  for (int l = 0; l < matrix.length; ++l) {
    const double centered = counts[l] - noise_mean;
    for (int k = 0; k < matrix.users; ++k)
      if (matrix.bit(k, l)) rhs[k] += centered;
  }
  return rhs;
}

}  // namespace

ChannelEstimate ls_estimate(const PilotMatrix& matrix, std::span<const double> counts,
                            double noise_mean) {
  if (counts.size() != static_cast<std::size_t>(matrix.length))
    throw ContractError("ls_estimate: counts length must equal schedule length");
  if (!std::isfinite(noise_mean) || noise_mean < 0.0)
    throw ContractError("ls_estimate: noise mean must be finite and non-negative");
  for (double u : counts)
    if (!std::isfinite(u)) throw ContractError("ls_estimate: counts must be finite");

  const int users = matrix.users;
  std::vector<double> rhs = normal_rhs(matrix, counts, noise_mean);

  if (matrix.origin && !matrix.origin->truncated) {
    // Whole-block repetitions keep the normal matrix exactly exchangeable:
    // diagonal L*a, off-diagonal L*b, so the inverse is closed-form.
    const AbcCoefficients abc = abc_of_pattern(users, matrix.origin->pattern);
    if (abc.a == abc.b) throw SingularError("ls_estimate: schedule gives a singular normal matrix");
    const double a = abc.a.to_double();
    const double b = abc.b.to_double();
    const double share = b / (a + (users - 1) * b);
    const double scale = 1.0 / (matrix.length * (a - b));
    double sum = 0.0;
    for (double r : rhs) sum += r;
    ChannelEstimate est;
    est.gains.resize(static_cast<std::size_t>(users));
    for (int k = 0; k < users; ++k) est.gains[k] = (rhs[k] - share * sum) * scale;
    return est;
  }

  SquareMatrix a = SquareMatrix::zero(users);
  for (int l = 0; l < matrix.length; ++l)
    for (int i = 0; i < users; ++i) {
      if (!matrix.bit(i, l)) continue;
      for (int j = i; j < users; ++j)
        if (matrix.bit(j, l)) {
          a.at(i, j) += 1.0;
          if (i != j) a.at(j, i) += 1.0;
        }
    }
  ChannelEstimate est;
  est.gains = solve_linear(std::move(a), std::move(rhs));
  return est;
}

double exact_mse_trace(const PilotMatrix& matrix, std::span<const double> gains,
                       double noise_mean) {
  if (gains.size() != static_cast<std::size_t>(matrix.users))
    throw ContractError("exact_mse_trace: gains length must equal user count");
  if (!std::isfinite(noise_mean) || noise_mean < 0.0)
    throw ContractError("exact_mse_trace: noise mean must be finite and non-negative");
  const int users = matrix.users;

  SquareMatrix a = SquareMatrix::zero(users);
  for (int l = 0; l < matrix.length; ++l)
    for (int i = 0; i < users; ++i) {
      if (!matrix.bit(i, l)) continue;
      for (int j = i; j < users; ++j)
        if (matrix.bit(j, l)) {
          a.at(i, j) += 1.0;
          if (i != j) a.at(j, i) += 1.0;
        }
    }
  const SquareMatrix inv = invert(std::move(a));

  double trace = 0.0;
  for (int i = 0; i < users; ++i) trace += inv.at(i, i);

  // Each slot contributes its own Poisson variance w_l = x_l' gains + noise,
  // propagated through the solve as ||inv * x_l||^2.
  double signal = 0.0;
  std::vector<double> y(static_cast<std::size_t>(users));
  for (int l = 0; l < matrix.length; ++l) {
    double w = 0.0;
    std::fill(y.begin(), y.end(), 0.0);
    for (int k = 0; k < users; ++k) {
      if (!matrix.bit(k, l)) continue;
      w += gains[k];
      for (int i = 0; i < users; ++i) y[i] += inv.at(i, k);
    }
    double norm2 = 0.0;
    for (double v : y) norm2 += v * v;
    signal += w * norm2;
  }
  return signal + noise_mean * trace;
}

double theoretical_mse(int users, int length, const AbcCoefficients& abc, double noise_mean,
                       double gain_l1) {
  if (users < 1 || length < 1) throw ContractError("theoretical_mse: users and length must be positive");
  if (!std::isfinite(noise_mean) || noise_mean < 0.0)
    throw ContractError("theoretical_mse: noise mean must be finite and non-negative");
  if (!std::isfinite(gain_l1) || gain_l1 < 0.0)
    throw ContractError("theoretical_mse: gain sum must be finite and non-negative");
  if (abc.a == abc.b) throw SingularError("theoretical_mse: a == b gives a singular schedule");

  const double a = abc.a.to_double();
  const double b = abc.b.to_double();
  const double c = abc.c.to_double();
  const double k = static_cast<double>(users);
  const double l = static_cast<double>(length);
  const double share = a + (k - 1.0) * b;

  const double noise_term = noise_mean * k * (1.0 - b / share) / (l * (a - b));
  const double inner = a + 3.0 * (k - 1.0) * b + (k - 1.0) * (k - 2.0) * c;
  const double bracket = share + ((2.0 - k) * b * b - 2.0 * a * b) / (share * share) * inner;
  const double signal_term = gain_l1 / (l * (a - b) * (a - b)) * bracket;
  return noise_term + signal_term;
}

std::vector<PatternScore> optimize_pattern(int users, int length, double noise_mean,
                                           double gain_l1) {
  if (users < 1) throw ContractError("optimize_pattern: users must be positive");
  if (users > kMaxUsersExhaustive)
    throw UnsupportedError("optimize_pattern: exhaustive search limited to 20 users");
  std::vector<PatternScore> scores;
  for (std::uint32_t mask = 1; mask < (1u << users); ++mask) {
    std::vector<int> weights;
    for (int w = 1; w <= users; ++w)
      if (mask & (1u << (w - 1))) weights.push_back(w);
    WeightPattern pattern{std::move(weights)};
    const AbcCoefficients abc = abc_of_pattern(users, pattern);
    if (abc.a == abc.b) continue;
    const double mse = theoretical_mse(users, length, abc, noise_mean, gain_l1);
    scores.push_back(PatternScore{std::move(pattern), abc, mse});
  }
  std::sort(scores.begin(), scores.end(), [&](const PatternScore& x, const PatternScore& y) {
    if (x.mse != y.mse) return x.mse < y.mse;
    const std::uint64_t wx = pattern_width(users, x.pattern);
    const std::uint64_t wy = pattern_width(users, y.pattern);
    if (wx != wy) return wx < wy;
    return x.pattern.weights < y.pattern.weights;
  });
  return scores;
}

std::string to_json_string(const PilotMatrix& matrix) {
  ordered_json j;
  j["K"] = matrix.users;
  j["L"] = matrix.length;
  if (matrix.origin) {
    j["beta"] = matrix.origin->pattern.weights;
    j["seed"] = matrix.origin->seed;
  }
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < matrix.users; ++r) {
    std::string row(static_cast<std::size_t>(matrix.length), '0');
    for (int l = 0; l < matrix.length; ++l)
      if (matrix.bit(r, l)) row[l] = '1';
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j.dump(2);
}

PilotMatrix pilot_matrix_from_json_string(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("pilot matrix JSON: parse failure: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("pilot matrix JSON: top level must be an object");
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (key != "K" && key != "L" && key != "beta" && key != "seed" && key != "rows")
      throw ConfigError("pilot matrix JSON: unknown key '" + key + "'");
  }
  if (!j.contains("K") || !j["K"].is_number_integer())
    throw ConfigError("pilot matrix JSON: integer 'K' required");
  if (!j.contains("L") || !j["L"].is_number_integer())
    throw ConfigError("pilot matrix JSON: integer 'L' required");
  if (!j.contains("rows") || !j["rows"].is_array())
    throw ConfigError("pilot matrix JSON: array 'rows' required");
  const int users = j["K"].get<int>();
  const int length = j["L"].get<int>();
  if (users < 1 || length < 1) throw ConfigError("pilot matrix JSON: K and L must be positive");
  if (j["rows"].size() != static_cast<std::size_t>(users))
    throw ConfigError("pilot matrix JSON: rows count must equal K");

  PilotMatrix matrix;
  matrix.users = users;
  matrix.length = length;
  matrix.bits.assign(static_cast<std::size_t>(users) * length, 0);
  for (int r = 0; r < users; ++r) {
    const auto& row = j["rows"][static_cast<std::size_t>(r)];
    if (!row.is_string()) throw ConfigError("pilot matrix JSON: rows must be strings");
    const std::string s = row.get<std::string>();
    if (s.size() != static_cast<std::size_t>(length))
      throw ConfigError("pilot matrix JSON: row length must equal L");
    for (int l = 0; l < length; ++l) {
      if (s[l] != '0' && s[l] != '1')
        throw ConfigError("pilot matrix JSON: rows must contain only '0' and '1'");
      matrix.bits[static_cast<std::size_t>(r) * length + l] = s[l] == '1';
    }
  }

  if (j.contains("beta") || j.contains("seed")) {
    if (!j.contains("beta") || !j.contains("seed"))
      throw ConfigError("pilot matrix JSON: beta and seed must appear together");
    if (!j["beta"].is_array()) throw ConfigError("pilot matrix JSON: beta must be an array");
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ConfigError("pilot matrix JSON: seed must be a non-negative integer");
    std::vector<int> weights;
    for (const auto& w : j["beta"]) {
      if (!w.is_number_integer()) throw ConfigError("pilot matrix JSON: beta entries must be integers");
      weights.push_back(w.get<int>());
    }
    WeightPattern pattern;
    std::uint64_t seed = j["seed"].get<std::uint64_t>();
    PilotMatrix rebuilt;
    try {
      pattern = make_pattern(std::move(weights), users);
      rebuilt = expand_to_length(users, pattern, length, seed);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("pilot matrix JSON: invalid beta: ") + e.what());
    }
    if (rebuilt.bits != matrix.bits)
      throw ConfigError("pilot matrix JSON: rows do not match the declared beta and seed");
    matrix.origin = rebuilt.origin;
  }
  return matrix;
}

}  // namespace uvsdma
