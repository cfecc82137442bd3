#pragma once

#include <random>

#include "mgnn/graph.hpp"

namespace mgnn::test_util {

// Random weighted graph: each edge present with probability `density`,
// weight uniform in [lo, hi].
inline AdjacencyMatrix random_graph(Eigen::Index n, double density, std::mt19937_64& rng,
                                    double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<double> weight(lo, hi);
  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (coin(rng) < density) w(i, j) = w(j, i) = weight(rng);
  return AdjacencyMatrix(std::move(w));
}

inline Matrix random_symmetric(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) m(i, j) = m(j, i) = g(rng);
  return m;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline double inf_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace mgnn::test_util
