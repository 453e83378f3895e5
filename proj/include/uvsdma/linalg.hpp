#pragma once

#include <vector>

namespace uvsdma {

/// Square dense matrix in row-major order. Only small systems (tens of rows)
/// appear in this library, so no factorization caching is needed.
struct SquareMatrix {
  int n = 0;
  std::vector<double> values;  // n x n, row-major

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * n + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * n + c]; }

  static SquareMatrix zero(int n) {
    return SquareMatrix{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  }
};

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// Throws SingularError when a pivot is negligible relative to the matrix.
std::vector<double> solve_linear(SquareMatrix a, std::vector<double> b);

/// Dense inverse via elimination on [A | I]. Throws SingularError when
/// singular to working precision.
SquareMatrix invert(SquareMatrix a);

}  // namespace uvsdma
