#include "uvsdma/linalg.hpp"

#include <cmath>
#include <utility>

#include "uvsdma/errors.hpp"

namespace uvsdma {

namespace {

/// Elimination on A with `rhs_cols` right-hand columns stored in `rhs`
/// (row-major n x rhs_cols). On return `rhs` holds the solutions.
void eliminate(SquareMatrix& a, std::vector<double>& rhs, int rhs_cols) {
  const int n = a.n;
  double scale = 0.0;
  for (double v : a.values) scale = std::max(scale, std::fabs(v));
  const double tol = scale * 1e-13 + 1e-300;

  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a.at(r, col)) > std::fabs(a.at(pivot, col))) pivot = r;
    if (std::fabs(a.at(pivot, col)) <= tol)
      throw SingularError("linear system is singular to working precision");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a.at(pivot, c), a.at(col, c));
      for (int c = 0; c < rhs_cols; ++c)
        std::swap(rhs[static_cast<std::size_t>(pivot) * rhs_cols + c],
                  rhs[static_cast<std::size_t>(col) * rhs_cols + c]);
    }
    const double inv = 1.0 / a.at(col, col);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a.at(r, col) * inv;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
      for (int c = 0; c < rhs_cols; ++c)
        rhs[static_cast<std::size_t>(r) * rhs_cols + c] -=
            f * rhs[static_cast<std::size_t>(col) * rhs_cols + c];
    }
  }
  for (int r = 0; r < n; ++r) {
    const double inv = 1.0 / a.at(r, r);
    for (int c = 0; c < rhs_cols; ++c) rhs[static_cast<std::size_t>(r) * rhs_cols + c] *= inv;
  }
}

}  // namespace

std::vector<double> solve_linear(SquareMatrix a, std::vector<double> b) {
  if (a.n <= 0 || b.size() != static_cast<std::size_t>(a.n))
    throw ContractError("solve_linear: dimension mismatch");
  eliminate(a, b, 1);
  return b;
}

SquareMatrix invert(SquareMatrix a) {
  if (a.n <= 0) throw ContractError("invert: matrix must be non-empty");
  const int n = a.n;
  std::vector<double> id(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) id[static_cast<std::size_t>(i) * n + i] = 1.0;
  eliminate(a, id, n);
  return SquareMatrix{n, std::move(id)};
}

}  // namespace uvsdma
