#pragma once

#include <array>
#include <cmath>
#include <functional>

namespace mgnn::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline Result gk15(const std::function<double(double)>& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[static_cast<std::size_t>(j)];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[static_cast<std::size_t>(j)] * pair;
    if (j % 2 == 1) gauss += kGaussWeights[static_cast<std::size_t>(j / 2)] * pair;
  }
  return {kronrod * half, std::abs((kronrod - gauss) * half), true};
}

inline Result adapt(const std::function<double(double)>& f, double a, double b, double tol,
                    const Result& whole, int depth) {
  if (whole.error <= tol || depth <= 0) {
    Result r = whole;
    r.converged = whole.error <= tol;
    return r;
  }
  const double mid = 0.5 * (a + b);
  const Result left = adapt(f, a, mid, 0.5 * tol, gk15(f, a, mid), depth - 1);
  const Result right = adapt(f, mid, b, 0.5 * tol, gk15(f, mid, b), depth - 1);
  return {left.value + right.value, left.error + right.error,
          left.converged && right.converged};
}

}  // namespace detail

// Adaptive Gauss-Kronrod (7/15) integration of f over [a, b].
inline Result integrate(const std::function<double(double)>& f, double a, double b,
                        double abs_tol = 1e-13, int max_depth = 40) {
  return detail::adapt(f, a, b, abs_tol, detail::gk15(f, a, b), max_depth);
}

}  // namespace mgnn::quad
