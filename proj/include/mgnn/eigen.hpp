#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mgnn/graph.hpp"

namespace mgnn {

// Eigenvalues ascending; column l of `vectors` pairs with values(l).
struct EigenSystem {
  Vector values;
  Matrix vectors;

  Eigen::Index n() const { return values.size(); }
};

struct JacobiOptions {
  int max_sweeps = 100;
  double relative_tolerance = 1e-12;
};

// Cyclic Jacobi eigensolver for a dense symmetric matrix. Converged when the
// off-diagonal Frobenius norm drops to tolerance * ||A||_F.
inline EigenSystem jacobi_eigen(const Matrix& input, const JacobiOptions& opts = {}) {
  if (input.rows() != input.cols()) throw DataError("eigendecomposition needs a square matrix");
  const Eigen::Index n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::Identity(n, n);

  auto off_norm = [&a, n] {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) sum += a(i, j) * a(i, j);
    return std::sqrt(sum);
  };

  const double target = opts.relative_tolerance * input.norm();
  bool converged = false;
  for (int sweep = 0; sweep <= opts.max_sweeps; ++sweep) {
    if (off_norm() <= target) {
      converged = true;
      break;
    }
    if (sweep == opts.max_sweeps) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }
  if (!converged) {
    throw NumericalError("Jacobi eigensolver did not converge in " +
                         std::to_string(opts.max_sweeps) + " sweeps");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });
  EigenSystem out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

// Eigendecomposition of a graph Laplacian; roundoff-negative eigenvalues are
// clamped to zero so kernels only ever see nonnegative arguments.
inline EigenSystem eigendecompose(const GraphLaplacian& l, const JacobiOptions& opts = {}) {
  EigenSystem eig = jacobi_eigen(l.matrix, opts);
  const double floor = -1e-8 * std::max(1.0, l.matrix.cwiseAbs().rowwise().sum().maxCoeff());
  for (Eigen::Index k = 0; k < eig.n(); ++k) {
    if (eig.values(k) < 0.0) {
      if (eig.values(k) < floor) {
        throw NumericalError("Laplacian has a negative eigenvalue " +
                             std::to_string(eig.values(k)));
      }
      eig.values(k) = 0.0;
    }
  }
  return eig;
}

}  // namespace mgnn
