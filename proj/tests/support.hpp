#pragma once

// Shared generators and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "wqlab/measures.hpp"
#include "wqlab/rng.hpp"

namespace wqlab::testing {

inline PointSet random_points(int d, Eigen::Index n, Rng& rng, double scale = 1.0) {
  PointSet pts(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int k = 0; k < d; ++k) pts(k, j) = scale * rng.uniform();
  }
  return pts;
}

inline DiscreteMeasure random_equal_weight(int d, Eigen::Index n, Rng& rng) {
  return DiscreteMeasure::empirical(random_points(d, n, rng));
}

/// Random atoms and weights normalized to `mass`.
inline DiscreteMeasure random_weighted(int d, Eigen::Index n, double mass, Rng& rng) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = 0.1 + rng.uniform();
  w *= mass / w.sum();
  return DiscreteMeasure(random_points(d, n, rng), w);
}

/// min over permutations of mean ||x_i - y_s(i)||^p, then the p-th root.
/// Enumerates with std::next_permutation; only for equal-weight measures of equal size.
inline double permutation_oracle(const PointSet& x, const PointSet& y, double p, Norm norm) {
  const auto n = static_cast<std::size_t>(x.cols());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += std::pow(distance(norm, x.col(static_cast<Eigen::Index>(i)), y.col(perm[i])), p);
    }
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::pow(best / static_cast<double>(n), 1.0 / p);
}

inline Norm norm_at(int k) {
  static const Norm norms[] = {Norm::L1, Norm::L2, Norm::LInf};
  return norms[k % 3];
}

}  // namespace wqlab::testing
