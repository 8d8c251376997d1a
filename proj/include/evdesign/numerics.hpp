#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "evdesign/error.hpp"

namespace evdesign {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument("normal_quantile: probability must lie in (0, 1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

/// x + expm1(-x), i.e. x - 1 + e^{-x}, without cancellation for small x.
inline double exp_remainder2(double x) {
  if (std::abs(x) < 1e-3) {
    // x^2/2 - x^3/6 + x^4/24 - x^5/120
    return x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)));
  }
  return x + std::expm1(-x);
}

/// Root of a continuous function given a sign-changing bracket [lo, hi].
/// Uses TOMS 748; `f_lo`/`f_hi` are the already-evaluated endpoint values.
template <class F>
double solve_bracketed(F&& f, double lo, double hi, double f_lo, double f_hi,
                       int bits = std::numeric_limits<double>::digits - 2) {
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo > 0.0) == (f_hi > 0.0)) {
    throw BracketFailure("no sign change in bracket [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]",
                         lo, hi, f_lo, f_hi);
  }
  std::uintmax_t iterations = 300;
  auto bracket = boost::math::tools::toms748_solve(
      f, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(bits), iterations);
  return 0.5 * (bracket.first + bracket.second);
}

template <class F>
double solve_bracketed(F&& f, double lo, double hi) {
  return solve_bracketed(f, lo, hi, f(lo), f(hi));
}

/// Adaptive 15-point Gauss-Kronrod on [a, b].
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-12) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 25, rel_tol);
}

}  // namespace evdesign
