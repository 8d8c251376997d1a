#pragma once

// Reference implementations used only by the tests. They are written from
// the textbook definitions and share no code with the library beyond the
// plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "evdesign/trial_data.hpp"

namespace oracle {

/// Piecewise-constant hazard written out directly.
struct Hazard {
  std::vector<double> cuts;
  std::vector<double> rates;

  double rate_at(double t) const {
    std::size_t j = 0;
    while (j < cuts.size() && t >= cuts[j]) ++j;
    return rates[j];
  }
  double cumulative(double t) const {
    double total = 0.0;
    double start = 0.0;
    for (std::size_t j = 0; j < rates.size(); ++j) {
      const double end = j < cuts.size() ? cuts[j] : INFINITY;
      if (t <= start) break;
      total += rates[j] * (std::min(t, end) - start);
      start = end;
    }
    return total;
  }
};

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                           double fm, double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

/// Adaptive Simpson quadrature on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double eps = 1e-12) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return simpson_step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), eps, 40);
}

/// Simpson over [a, b] split at the given interior points.
inline double simpson_split(const std::function<double(double)>& f, double a, double b,
                            std::vector<double> points, double eps = 1e-12) {
  points.push_back(a);
  points.push_back(b);
  std::sort(points.begin(), points.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double lo = std::max(a, points[i]);
    const double hi = std::min(b, points[i + 1]);
    if (hi > lo) total += simpson(f, lo, hi, eps);
  }
  return total;
}

/// n_arm/r * int_0^{min(r,t)} int_0^{t-x} f(y) Lbar(y) dy dx by nested
/// quadrature of the raw integrand.
inline double expected_events(const Hazard& survival, double dropout_rate, double r, double n_arm,
                              double t) {
  const auto integrand = [&](double y) {
    return survival.rate_at(y) * std::exp(-survival.cumulative(y) - dropout_rate * y);
  };
  const auto inner = [&](double x) {
    return simpson_split(integrand, 0.0, t - x, survival.cuts);
  };
  std::vector<double> kinks;
  for (double c : survival.cuts) kinks.push_back(t - c);
  const double upper = std::min(r, t);
  return n_arm / r * simpson_split(inner, 0.0, upper, kinks, 1e-11);
}

struct MonteCarlo {
  double mean;
  double se;
};

/// Events by calendar time t among n_patients simulated with std::mt19937_64.
/// Piecewise event times use the memoryless property segment by segment.
inline MonteCarlo expected_events_mc(const Hazard& survival, double dropout_rate, double r,
                                     double n_arm, double t, int n_patients, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> entry(0.0, r);
  std::exponential_distribution<double> dropout(dropout_rate);
  long hits = 0;
  for (int i = 0; i < n_patients; ++i) {
    double start = 0.0;
    double event = 0.0;
    for (std::size_t j = 0;; ++j) {
      const double end = j < survival.cuts.size() ? survival.cuts[j] : INFINITY;
      const double w = std::exponential_distribution<double>(survival.rates[j])(gen);
      if (start + w < end) {
        event = start + w;
        break;
      }
      start = end;
    }
    const double x = entry(gen);
    const double l = dropout(gen);
    if (event <= l && x + event <= t) ++hits;
  }
  const double p = static_cast<double>(hits) / n_patients;
  return {n_arm * p, n_arm * std::sqrt(p * (1.0 - p) / n_patients)};
}

/// Kolmogorov distance between the empirical CDF of `draws` and `cdf`.
inline double ks_distance(std::vector<double> draws, const std::function<double(double)>& cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = cdf(draws[i]);
    worst = std::max({worst, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return worst;
}

/// Logrank Z by re-scanning the whole dataset at every distinct event time.
inline double logrank(const evdesign::TrialDataset& data) {
  std::vector<double> times;
  for (const auto& o : data.records) {
    if (o.event && std::find(times.begin(), times.end(), o.time) == times.end()) {
      times.push_back(o.time);
    }
  }
  double u = 0.0;
  double v = 0.0;
  for (double t : times) {
    double n1 = 0, n = 0, d1 = 0, d = 0;
    for (const auto& o : data.records) {
      if (o.time < t) continue;
      const bool exp_arm = o.arm == evdesign::Arm::experimental;
      n += 1;
      n1 += exp_arm ? 1 : 0;
      if (o.time == t && o.event) {
        d += 1;
        d1 += exp_arm ? 1 : 0;
      }
    }
    u += d1 - d * n1 / n;
    if (n > 1) v += d * (n1 / n) * (1 - n1 / n) * (n - d) / (n - 1);
  }
  return u / std::sqrt(v);
}

}  // namespace oracle
