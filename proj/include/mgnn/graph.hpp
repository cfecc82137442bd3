#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "mgnn/error.hpp"

namespace mgnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Symmetric, nonnegative, zero-diagonal edge-weight matrix of one graph.
// Construction validates the invariants exactly; ingestion-time cleanup
// (symmetrization, diagonal zeroing) lives in data.hpp.
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(Matrix weights) : weights_(std::move(weights)) {
    if (weights_.rows() != weights_.cols()) {
      throw DataError("adjacency matrix is not square (" + std::to_string(weights_.rows()) +
                      "x" + std::to_string(weights_.cols()) + ")");
    }
    if (weights_.rows() == 0) throw DataError("adjacency matrix is empty");
    const Eigen::Index n = weights_.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double w = weights_(i, j);
        if (!std::isfinite(w)) throw DataError("non-finite edge weight");
        if (w < 0.0) {
          throw DataError("negative edge weight " + std::to_string(w) + " at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
        }
        if (w != weights_(j, i)) throw DataError("adjacency matrix is not symmetric");
      }
      if (weights_(j, j) != 0.0) throw DataError("adjacency matrix has a nonzero diagonal");
    }
  }

  Eigen::Index n() const { return weights_.rows(); }
  const Matrix& weights() const { return weights_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return weights_(i, j); }

 private:
  Matrix weights_;
};

struct GraphLaplacian {
  Matrix matrix;
  Vector degrees;
  bool normalized = false;

  Eigen::Index n() const { return matrix.rows(); }
};

// L = D - A, or L_sym = I - D^{-1/2} A D^{-1/2} when `normalized`.
// Isolated nodes get an identity row/column in the normalized form.
inline GraphLaplacian build_laplacian(const AdjacencyMatrix& a, bool normalized) {
  GraphLaplacian out;
  out.normalized = normalized;
  const Matrix& w = a.weights();
  const Eigen::Index n = a.n();
  out.degrees = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out.degrees(i) += w(i, j);
  if (!normalized) {
    out.matrix = -w;
    out.matrix.diagonal() = out.degrees;
    return out;
  }
  Vector inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inv_sqrt(i) = out.degrees(i) > 0.0 ? 1.0 / std::sqrt(out.degrees(i)) : 0.0;
  }
  out.matrix = Matrix::Identity(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != j) out.matrix(i, j) = -inv_sqrt(i) * w(i, j) * inv_sqrt(j);
    }
  }
  return out;
}

}  // namespace mgnn
