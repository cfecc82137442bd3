#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "mgnn/error.hpp"
#include "mgnn/quadrature.hpp"

namespace mgnn {

// Band-pass spectral kernel evaluated as kappa(s, x) = k(s * x).
// The default family is k(y) = y * exp(-y); custom profiles are accepted for
// transforms and the admissibility check but have no analytic derivatives.
class Kernel {
 public:
  enum class Family { kSxExp, kCustom };

  Kernel() = default;

  static Kernel sx_exp() { return Kernel{}; }
  static Kernel custom(std::string name, std::function<double(double)> profile) {
    Kernel k;
    k.family_ = Family::kCustom;
    k.name_ = std::move(name);
    k.profile_ = std::move(profile);
    return k;
  }
  static Kernel from_name(const std::string& name) {
    if (name == "sx_exp") return sx_exp();
    throw ConfigError("unknown kernel family '" + name + "' (supported: sx_exp)");
  }

  Family family() const { return family_; }
  const std::string& name() const { return name_; }
  bool has_analytic_derivatives() const { return family_ == Family::kSxExp; }

  // Unit-scale profile k(y).
  double profile(double y) const {
    if (family_ == Family::kSxExp) return y * std::exp(-y);
    return profile_(y);
  }

  double operator()(double s, double x) const {
    if (!(s > 0.0)) throw ConfigError("kernel scale must be positive, got " + std::to_string(s));
    return profile(s * x);
  }

 private:
  Family family_ = Family::kSxExp;
  std::string name_ = "sx_exp";
  std::function<double(double)> profile_;
};

inline double kernel_eval(const Kernel& kernel, double s, double x) { return kernel(s, x); }

struct AdmissibilityOptions {
  // Values above this cap are reported as a non-admissible kernel.
  double cap = 1e6;
  double tolerance = 1e-13;
};

// C_k = int_0^inf k(x)^2 / x dx, integrated in u = ln x so that both tails are
// finite windows. Windows are added outward until their contribution is
// negligible; a tail that never decays (k(0) != 0, or slow decay at infinity)
// is reported as divergence.
inline double admissibility_constant(const Kernel& kernel, const AdmissibilityOptions& opts = {}) {
  const auto integrand = [&kernel](double u) {
    const double k = kernel.profile(std::exp(u));
    return k * k;
  };
  constexpr double kWindow = 8.0;
  constexpr double kLimit = 700.0;
  double total = quad::integrate(integrand, -kWindow, kWindow, opts.tolerance).value;

  const auto extend = [&](double sign) {
    for (double lo = kWindow; lo < kLimit; lo += kWindow) {
      const double a = sign > 0 ? lo : -(lo + kWindow);
      const double b = sign > 0 ? lo + kWindow : -lo;
      const double piece = quad::integrate(integrand, a, b, opts.tolerance).value;
      total += piece;
      if (!std::isfinite(total) || total > opts.cap) return false;
      if (piece <= 1e-15 * std::max(total, 1e-300)) return true;
    }
    return false;
  };
  const bool upper_ok = extend(+1.0);
  const bool lower_ok = upper_ok && extend(-1.0);
  if (!upper_ok || !lower_ok || !std::isfinite(total) || total > opts.cap) {
    throw NumericalError("kernel '" + kernel.name() +
                         "' is not admissible: integral of k(x)^2/x diverges");
  }
  if (total <= 0.0) {
    throw NumericalError("kernel '" + kernel.name() + "' has a zero admissibility constant");
  }
  return total;
}

}  // namespace mgnn
