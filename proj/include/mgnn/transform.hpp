#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "mgnn/eigen.hpp"
#include "mgnn/kernel.hpp"

namespace mgnn {

// Positive spectral scales, one per resolution level.
class ScaleSet {
 public:
  ScaleSet() = default;
  explicit ScaleSet(std::vector<double> scales) : scales_(std::move(scales)) {
    if (scales_.empty()) throw ConfigError("scale set must contain at least one scale");
    for (double s : scales_) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw ConfigError("scales must be finite and positive, got " + std::to_string(s));
      }
    }
  }
  std::size_t size() const { return scales_.size(); }
  double operator[](std::size_t j) const { return scales_[j]; }
  const std::vector<double>& values() const { return scales_; }

 private:
  std::vector<double> scales_;
};

// One N x N slice per scale, in scale order.
struct MultiResolutionMap {
  std::vector<Matrix> slices;

  std::size_t scale_count() const { return slices.size(); }
  Eigen::Index n() const { return slices.empty() ? 0 : slices.front().rows(); }
};

namespace detail {

inline void mirror_upper(Matrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j + 1; i < m.rows(); ++i) m(i, j) = m(j, i);
}

inline void require_analytic(const Kernel& kernel, const char* what) {
  if (!kernel.has_analytic_derivatives()) {
    throw ConfigError(std::string(what) + " is only available for the sx_exp kernel, not '" +
                      kernel.name() + "'");
  }
}

}  // namespace detail

// U diag(f(lambda)) U^T, exactly symmetric.
inline Matrix spectral_apply(const EigenSystem& eig, const std::function<double(double)>& f) {
  Vector d(eig.n());
  for (Eigen::Index l = 0; l < eig.n(); ++l) d(l) = f(eig.values(l));
  Matrix out = (eig.vectors * d.asDiagonal()) * eig.vectors.transpose();
  detail::mirror_upper(out);
  return out;
}

// Wavelet-like basis U k(s Lambda) U^T.
inline Matrix wavelet_basis(const EigenSystem& eig, const Kernel& kernel, double s) {
  return spectral_apply(eig, [&](double lambda) { return kernel(s, lambda); });
}

// Coefficient matrix U k(s Lambda) Lambda U^T.
inline Matrix transform_coefficients(const EigenSystem& eig, const Kernel& kernel, double s) {
  return spectral_apply(eig, [&](double lambda) { return kernel(s, lambda) * lambda; });
}

// Single-scale representation L_s = U k(s Lambda)^2 Lambda U^T.
inline Matrix transform_exact(const EigenSystem& eig, const Kernel& kernel, double s) {
  return spectral_apply(eig, [&](double lambda) {
    const double k = kernel(s, lambda);
    return k * k * lambda;
  });
}

inline MultiResolutionMap multiresolution_map(const EigenSystem& eig, const Kernel& kernel,
                                              const ScaleSet& scales) {
  MultiResolutionMap m;
  m.slices.reserve(scales.size());
  for (double s : scales.values()) m.slices.push_back(transform_exact(eig, kernel, s));
  return m;
}

// d/ds L_s = U diag(2 s lambda^3 e^{-2 s lambda} (1 - s lambda)) U^T.
inline Matrix dLs_dscale(const EigenSystem& eig, const Kernel& kernel, double s) {
  detail::require_analytic(kernel, "analytic scale derivative");
  if (!(s > 0.0)) throw ConfigError("scale must be positive");
  return spectral_apply(eig, [s](double lambda) {
    const double sl = s * lambda;
    return 2.0 * s * lambda * lambda * lambda * std::exp(-2.0 * sl) * (1.0 - sl);
  });
}

// Log-spaced scale grid over [1e-3 / lambda_max, 1e3 / lambda_min+].
inline std::vector<double> default_reconstruction_grid(const EigenSystem& eig, int points = 400) {
  if (points < 2) throw ConfigError("reconstruction grid needs at least 2 points");
  double lambda_max = 0.0;
  double lambda_min_pos = 0.0;
  const double zero_tol = 1e-10 * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  for (Eigen::Index l = 0; l < eig.n(); ++l) {
    const double v = eig.values(l);
    if (v > zero_tol) {
      lambda_max = std::max(lambda_max, v);
      lambda_min_pos = lambda_min_pos == 0.0 ? v : std::min(lambda_min_pos, v);
    }
  }
  if (lambda_max == 0.0) lambda_max = lambda_min_pos = 1.0;
  const double lo = std::log(1e-3 / lambda_max);
  const double hi = std::log(1e3 / lambda_min_pos);
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / (points - 1));
  }
  return grid;
}

// Inverse transform (1/C_k) int L_s ds/s, trapezoidal rule in log s.
inline Matrix reconstruct(const EigenSystem& eig, const Kernel& kernel,
                          const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("reconstruction grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw ConfigError("reconstruction grid must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw ConfigError("reconstruction grid must be strictly increasing");
    }
  }
  const double ck = admissibility_constant(kernel);
  // Quadrature acts on each eigenvalue independently.
  const auto weight = [&](double lambda) {
    double acc = 0.0;
    double prev_u = std::log(grid[0]);
    double prev_f = std::pow(kernel(grid[0], lambda), 2) * lambda;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double u = std::log(grid[i]);
      const double f = std::pow(kernel(grid[i], lambda), 2) * lambda;
      acc += 0.5 * (u - prev_u) * (f + prev_f);
      prev_u = u;
      prev_f = f;
    }
    return acc / ck;
  };
  return spectral_apply(eig, weight);
}

// Taylor coefficients c_0..c_K of g_s(x) = x k(s x)^2 about x = 1.
struct TaylorCoefficients {
  double scale = 0.0;
  std::vector<double> coeffs;

  int order() const { return static_cast<int>(coeffs.size()) - 1; }
};

// Taylor coefficients about x = 1 of p(x) e^{-2 s x} for a polynomial p given
// by ascending coefficients. Uses q_{n+1} = (q_n' - 2 s q_n) / (n + 1) with
// q_0 = p, so that c_n = q_n(1) e^{-2s}.
inline std::vector<double> poly_exp_taylor(std::vector<double> poly, double s, int order) {
  if (order < 0) throw ConfigError("Taylor order must be nonnegative");
  const double damp = std::exp(-2.0 * s);
  std::vector<double> out(static_cast<std::size_t>(order) + 1);
  for (int n = 0; n <= order; ++n) {
    double at_one = 0.0;
    for (double c : poly) at_one += c;
    out[static_cast<std::size_t>(n)] = at_one * damp;
    std::vector<double> next(poly.size(), 0.0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k] -= 2.0 * s * poly[k];
      if (k > 0) next[k - 1] += static_cast<double>(k) * poly[k];
    }
    for (double& c : next) c /= static_cast<double>(n + 1);
    poly = std::move(next);
  }
  return out;
}

inline TaylorCoefficients taylor_coefficients(const Kernel& kernel, double s, int order) {
  detail::require_analytic(kernel, "Taylor approximation");
  if (!(s > 0.0)) throw ConfigError("scale must be positive");
  // g_s(x) = s^2 x^3 e^{-2 s x}
  return {s, poly_exp_taylor({0.0, 0.0, 0.0, s * s}, s, order)};
}

// Taylor coefficients of d/ds g_s(x) = (2 s x^3 - 2 s^2 x^4) e^{-2 s x}.
inline TaylorCoefficients taylor_scale_derivative_coefficients(const Kernel& kernel, double s,
                                                               int order) {
  detail::require_analytic(kernel, "Taylor approximation");
  if (!(s > 0.0)) throw ConfigError("scale must be positive");
  return {s, poly_exp_taylor({0.0, 0.0, 0.0, 2.0 * s, -2.0 * s * s}, s, order)};
}

namespace detail {

inline void require_bounded_spectrum(const GraphLaplacian& l) {
  if (l.normalized) return;
  const double bound = l.matrix.cwiseAbs().rowwise().sum().maxCoeff();
  if (bound > 2.0) {
    throw ConfigError(
        "Taylor approximation needs a normalized Laplacian (spectrum in [0, 2]); "
        "got an unnormalized one with row-sum bound " + std::to_string(bound));
  }
}

// sum_n c_n (L - I)^n by Horner accumulation.
inline Matrix shifted_polynomial(const GraphLaplacian& l, const std::vector<double>& c) {
  const Eigen::Index n = l.n();
  Matrix shifted = l.matrix - Matrix::Identity(n, n);
  Matrix acc = c.back() * Matrix::Identity(n, n);
  for (std::size_t k = c.size() - 1; k-- > 0;) {
    acc = acc * shifted;
    acc.diagonal().array() += c[k];
  }
  mirror_upper(acc);
  return acc;
}

}  // namespace detail

// L_s ~ sum_{n=0}^{K} c_n (L - I)^n; needs no eigendecomposition.
inline Matrix transform_approx(const GraphLaplacian& l_norm, const Kernel& kernel, double s,
                               int order) {
  detail::require_bounded_spectrum(l_norm);
  return detail::shifted_polynomial(l_norm, taylor_coefficients(kernel, s, order).coeffs);
}

// Derivative of the truncated series with respect to the scale.
inline Matrix dLs_dscale_approx(const GraphLaplacian& l_norm, const Kernel& kernel, double s,
                                int order) {
  detail::require_bounded_spectrum(l_norm);
  return detail::shifted_polynomial(
      l_norm, taylor_scale_derivative_coefficients(kernel, s, order).coeffs);
}

// Cached per-graph input to the classifier: either the eigensystem (exact
// transform) or the normalized Laplacian plus series order (approximation).
class GraphSpectrum {
 public:
  struct Approximate {
    GraphLaplacian laplacian;
    int order = 30;
  };

  static GraphSpectrum exact(EigenSystem eig) { return GraphSpectrum(std::move(eig)); }
  static GraphSpectrum approximate(GraphLaplacian l_norm, int order) {
    detail::require_bounded_spectrum(l_norm);
    if (order < 0) throw ConfigError("Taylor order must be nonnegative");
    return GraphSpectrum(Approximate{std::move(l_norm), order});
  }

  bool is_exact() const { return std::holds_alternative<EigenSystem>(data_); }
  Eigen::Index n() const {
    if (const auto* eig = std::get_if<EigenSystem>(&data_)) return eig->n();
    return std::get<Approximate>(data_).laplacian.n();
  }

  Matrix slice(const Kernel& kernel, double s) const {
    if (const auto* eig = std::get_if<EigenSystem>(&data_)) return transform_exact(*eig, kernel, s);
    const auto& a = std::get<Approximate>(data_);
    return transform_approx(a.laplacian, kernel, s, a.order);
  }

  Matrix slice_derivative(const Kernel& kernel, double s) const {
    if (const auto* eig = std::get_if<EigenSystem>(&data_)) return dLs_dscale(*eig, kernel, s);
    const auto& a = std::get<Approximate>(data_);
    return dLs_dscale_approx(a.laplacian, kernel, s, a.order);
  }

  MultiResolutionMap feature_map(const Kernel& kernel, const ScaleSet& scales) const {
    MultiResolutionMap m;
    m.slices.reserve(scales.size());
    for (double s : scales.values()) m.slices.push_back(slice(kernel, s));
    return m;
  }

 private:
  explicit GraphSpectrum(std::variant<EigenSystem, Approximate> data) : data_(std::move(data)) {}
  std::variant<EigenSystem, Approximate> data_;
};

}  // namespace mgnn
