#pragma once

#include <algorithm>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"

namespace slfc {

/// Discrete Frechet distance between two paths under the Euclidean ground
/// metric, by the standard dynamic program over monotone couplings.
inline double frechet_distance(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.empty() || b.empty()) throw ContractError("frechet_distance: empty path");
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t j = 0; j < m; ++j) {
    double d = dist2(a[0], b[j]);
    prev[j] = j == 0 ? d : std::max(prev[j - 1], d);
  }
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double d = dist2(a[i], b[j]);
      double best;
      if (j == 0) {
        best = prev[0];
      } else {
        best = std::min({prev[j], prev[j - 1], cur[j - 1]});
      }
      cur[j] = std::max(best, d);
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

}  // namespace slfc
