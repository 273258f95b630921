#pragma once

// Bath spectral densities. The variable of every weight is the mode
// frequency omega; the wave-vector k = omega / c only enters through the
// spatial phase of the couplings (see chain_mapping.hpp). With c = 1 the two
// are the same number, which is the unit system of all shipped configs.

#include <cmath>
#include <limits>
#include <sstream>

#include "corrbath/common.hpp"

namespace corrbath {

/// Ohmic spectral density with a hard cut-off: J(w) = 2 alpha w H(w_c - w).
struct OhmicSpec {
  double alpha = 0.12;       ///< dimensionless coupling strength
  double cutoff = 1.0;       ///< cut-off frequency w_c (= k_c when c = 1)
  double sound_speed = 1.0;  ///< phonon speed c

  void validate() const {
    detail::require(alpha > 0, "OhmicSpec: alpha must be > 0");
    detail::require(cutoff > 0, "OhmicSpec: cutoff must be > 0");
    detail::require(sound_speed > 0, "OhmicSpec: sound_speed must be > 0");
  }
};

/// Thermal extension on [-w_c, w_c] at inverse temperature beta.
struct ThermalSpec {
  OhmicSpec base;
  double beta = 1.0;

  void validate() const {
    base.validate();
    detail::require(beta > 0, "ThermalSpec: beta must be > 0");
  }
};

/// Bose-Einstein occupation 1/(e^{beta w} - 1). Defined for negative w too.
inline double bose_einstein(double beta, double omega) {
  const double x = beta * omega;
  if (x == 0.0)
    throw InputError("bose_einstein: beta*omega = 0 is singular, use the limit form");
  return 1.0 / std::expm1(x);
}

inline double evaluate_zero_t(const OhmicSpec &spec, double omega) {
  if (omega < 0) {
    std::ostringstream os;
    os << "evaluate_zero_t: negative frequency " << omega;
    throw InputError(os.str());
  }
  return omega <= spec.cutoff ? 2.0 * spec.alpha * omega : 0.0;
}

namespace detail {
// x / (1 - e^{-x}) = x (n(x) + 1), nonnegative for all real x.
inline double thermal_factor(double x) {
  if (std::abs(x) < 1e-6) return 1.0 + x / 2.0 + x * x / 12.0;
  const double denom = -std::expm1(-x);
  if (!std::isfinite(denom)) return 0.0;  // x -> -inf
  const double v = x / denom;
  return v > 0 ? v : 0.0;
}
} // namespace detail

/// J_beta(w) = J_ext(w) (n_beta(w) + 1) with the odd extension J_ext(w) = 2 alpha w.
inline double evaluate_thermal(const ThermalSpec &spec, double omega) {
  const double wc = spec.base.cutoff;
  if (std::abs(omega) > wc * (1 + 1e-14)) {
    std::ostringstream os;
    os << "evaluate_thermal: |omega| = " << std::abs(omega) << " exceeds cutoff " << wc;
    throw InputError(os.str());
  }
  return 2.0 * spec.base.alpha / spec.beta * detail::thermal_factor(spec.beta * omega);
}

} // namespace corrbath
