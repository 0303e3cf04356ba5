#pragma once

#include <limits>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"

namespace slfc {

/// Hungarian algorithm (shortest augmenting paths with potentials) on a
/// square cost matrix. Returns the column assigned to each row, minimizing
/// total cost. O(n^3).
inline std::vector<std::size_t> hungarian_min_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ShapeError("hungarian: matrix must be square");
  const std::size_t n = cost.rows();
  const double kInf = std::numeric_limits<double>::infinity();
  // 1-based internal arrays; index 0 is the virtual root
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace slfc
