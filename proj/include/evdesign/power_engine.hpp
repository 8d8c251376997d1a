#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "evdesign/error.hpp"
#include "evdesign/event_dynamics.hpp"
#include "evdesign/numerics.hpp"
#include "evdesign/trial_data.hpp"
#include "evdesign/trial_design.hpp"

namespace evdesign {

enum class ApproxMethod { schoenfeld, freedman, rubinstein, piecewise_mle, empirical };

inline std::string_view to_string(ApproxMethod m) {
  switch (m) {
    case ApproxMethod::schoenfeld: return "schoenfeld";
    case ApproxMethod::freedman: return "freedman";
    case ApproxMethod::rubinstein: return "rubinstein";
    case ApproxMethod::piecewise_mle: return "piecewise_mle";
    case ApproxMethod::empirical: return "empirical";
  }
  return "unknown";
}

/// Accepts the long names and the one-letter tags S, F, R, PE, E.
inline ApproxMethod parse_method(std::string_view s) {
  if (s == "S" || s == "schoenfeld") return ApproxMethod::schoenfeld;
  if (s == "F" || s == "freedman") return ApproxMethod::freedman;
  if (s == "R" || s == "rubinstein") return ApproxMethod::rubinstein;
  if (s == "PE" || s == "piecewise_mle") return ApproxMethod::piecewise_mle;
  if (s == "E" || s == "empirical") return ApproxMethod::empirical;
  throw InvalidArgument("unknown approximation method '" + std::string(s) + "'");
}

/// Mean of the unit-variance normal approximating the logrank statistic.
struct MuValue {
  double mu = 0.0;
  ApproxMethod method = ApproxMethod::schoenfeld;
  // Per-interval event counts behind a piecewise value; empty otherwise.
  std::vector<double> experimental_by_interval;
  std::vector<double> control_by_interval;
};

namespace detail {
inline void require_events_and_ratio(double d, double phi) {
  if (!(d > 0.0)) throw InvalidArgument("number of events must be positive");
  if (!(phi > 0.0)) throw InvalidArgument("allocation ratio must be positive");
}
}  // namespace detail

inline MuValue mu_schoenfeld(double theta, double d, double phi) {
  detail::require_events_and_ratio(d, phi);
  return {theta / (1.0 + phi) * std::sqrt(d * phi), ApproxMethod::schoenfeld, {}, {}};
}

inline MuValue mu_freedman(double theta, double d, double phi) {
  detail::require_events_and_ratio(d, phi);
  const double psi = std::exp(theta);
  return {std::expm1(theta) / (1.0 + psi * phi) * std::sqrt(d * phi), ApproxMethod::freedman, {},
          {}};
}

inline MuValue mu_rubinstein(double theta, double expected_experimental, double expected_control) {
  if (!(expected_experimental > 0.0) || !(expected_control > 0.0)) {
    throw InvalidArgument("Rubinstein mean needs positive expected events in both arms");
  }
  return {theta / std::sqrt(1.0 / expected_experimental + 1.0 / expected_control),
          ApproxMethod::rubinstein, {}, {}};
}

/// Information-weighted mean over intervals; an interval with no events in
/// either arm carries no information.
inline MuValue mu_piecewise(double theta, std::span<const double> experimental,
                            std::span<const double> control) {
  if (experimental.size() != control.size() || experimental.empty()) {
    throw InvalidArgument("piecewise mean needs the same positive number of intervals per arm");
  }
  double information = 0.0;
  for (std::size_t j = 0; j < experimental.size(); ++j) {
    const double de = experimental[j];
    const double dc = control[j];
    if (de < 0.0 || dc < 0.0) throw InvalidArgument("event counts must be nonnegative");
    if (de > 0.0 && dc > 0.0) information += 1.0 / (1.0 / de + 1.0 / dc);
  }
  if (information == 0.0) {
    throw InvalidArgument("piecewise mean undefined: no interval has events in both arms");
  }
  return {theta * std::sqrt(information), ApproxMethod::piecewise_mle,
          std::vector<double>(experimental.begin(), experimental.end()),
          std::vector<double>(control.begin(), control.end())};
}

/// Power of the one-sided level-alpha test: Phi(|mu| - z_{1-alpha}).
inline double power_from_mu(double mu, double alpha_one_sided) {
  if (!(alpha_one_sided > 0.0 && alpha_one_sided < 0.5)) {
    throw InvalidArgument("one-sided alpha must lie in (0, 0.5)");
  }
  return normal_cdf(std::abs(mu) - normal_quantile(1.0 - alpha_one_sided));
}

inline double power_from_mu(const MuValue& mu, double alpha_one_sided) {
  return power_from_mu(mu.mu, alpha_one_sided);
}

/// `tabulated` rounds normal quantiles to two decimals (1.96, 0.84), the
/// convention of hand-computed event targets.
enum class QuantileConvention { exact, tabulated };

inline double z_value(double p, QuantileConvention convention) {
  const double z = normal_quantile(p);
  return convention == QuantileConvention::tabulated ? std::round(z * 100.0) / 100.0 : z;
}

namespace detail {
inline int ceil_events(double x) {
  // Guard against x landing a few ulps above an integer.
  return static_cast<int>(std::ceil(x * (1.0 - 1e-12)));
}
}  // namespace detail

/// Smallest d with Schoenfeld power >= target at ratio phi.
inline int schoenfeld_events(double theta, double phi, double alpha, double power,
                             QuantileConvention convention = QuantileConvention::exact) {
  if (theta == 0.0) throw InvalidArgument("no treatment effect: required events are unbounded");
  const double z = z_value(1.0 - alpha, convention) + z_value(power, convention);
  return detail::ceil_events(z * z * (1.0 + phi) * (1.0 + phi) / (phi * theta * theta));
}

inline int freedman_events(double theta, double phi, double alpha, double power,
                           QuantileConvention convention = QuantileConvention::exact) {
  if (theta == 0.0) throw InvalidArgument("no treatment effect: required events are unbounded");
  const double z = z_value(1.0 - alpha, convention) + z_value(power, convention);
  const double psi = std::exp(theta);
  const double shift = std::expm1(theta);
  return detail::ceil_events(z * z * (1.0 + psi * phi) * (1.0 + psi * phi) /
                             (phi * shift * shift));
}

/// Mean under `method` for `design` analysed at `d` events. Rubinstein and
/// piecewise values use expected counts at the expected duration t_d; the
/// piecewise intervals are the control survival model's intervals.
inline MuValue mu_for_design(ApproxMethod method, const TrialDesign& design, double d) {
  const double theta = design.log_hazard_ratio();
  switch (method) {
    case ApproxMethod::schoenfeld: return mu_schoenfeld(theta, d, design.allocation_ratio);
    case ApproxMethod::freedman: return mu_freedman(theta, d, design.allocation_ratio);
    case ApproxMethod::rubinstein: {
      const ArmEvents at = expected_events_by_arm(design, trial_duration(design, d));
      return mu_rubinstein(theta, at.experimental, at.control);
    }
    case ApproxMethod::piecewise_mle: {
      const double t = trial_duration(design, d);
      const auto knots = design.control.cuts();
      const auto e = expected_events_by_interval(event_curve_inputs(design, Arm::experimental), t, knots);
      const auto c = expected_events_by_interval(event_curve_inputs(design, Arm::control), t, knots);
      return mu_piecewise(theta, e, c);
    }
    case ApproxMethod::empirical: break;
  }
  throw InvalidArgument("empirical power needs the trial simulator");
}

inline double analytic_power(ApproxMethod method, const TrialDesign& design, double d) {
  return power_from_mu(mu_for_design(method, design, d), design.alpha);
}

/// Smallest integer d whose power under `method` reaches `target_power`.
inline int required_events(ApproxMethod method, const TrialDesign& design, double target_power,
                           QuantileConvention convention = QuantileConvention::exact) {
  if (!(target_power > design.alpha && target_power < 1.0)) {
    throw InvalidArgument("target power must lie in (alpha, 1)");
  }
  const double theta = design.log_hazard_ratio();
  switch (method) {
    case ApproxMethod::schoenfeld:
      return schoenfeld_events(theta, design.allocation_ratio, design.alpha, target_power, convention);
    case ApproxMethod::freedman:
      return freedman_events(theta, design.allocation_ratio, design.alpha, target_power, convention);
    case ApproxMethod::rubinstein:
    case ApproxMethod::piecewise_mle: {
      const double asymptote = asymptotic_total_events(design);
      const int cap = static_cast<int>(std::ceil(asymptote * (1.0 - 1e-9))) - 1;
      if (cap < 1) throw Unreachable("design yields fewer than one expected event", 1.0, asymptote);
      const auto reaches = [&](int d) { return analytic_power(method, design, d) >= target_power; };
      int d = std::clamp(schoenfeld_events(theta, design.allocation_ratio, design.alpha,
                                           target_power, convention),
                         1, cap);
      if (reaches(d)) {
        while (d > 1 && reaches(d - 1)) --d;
        return d;
      }
      while (!reaches(d)) {
        if (d >= cap) {
          throw Unreachable("target power not reachable before the event asymptote", d + 1.0,
                            asymptote);
        }
        ++d;
      }
      return d;
    }
    case ApproxMethod::empirical: break;
  }
  throw InvalidArgument("empirical event sizes come from calibrate_events");
}

struct AllocationSolution {
  double phi_star = 1.0;
  /// E(D_e(t_d)) / E(D_c(t_d)) at phi_star; NaN when d is unreachable there.
  double achieved_balance = std::numeric_limits<double>::quiet_NaN();
  ApproxMethod method = ApproxMethod::schoenfeld;
};

namespace detail {
inline double balance_at(const TrialDesign& design, double phi, double d) {
  const TrialDesign v = design.with_allocation_ratio(phi);
  return expected_events_by_arm(v, trial_duration(v, d)).ratio();
}

inline double balance_or_nan(const TrialDesign& design, double phi, double d) {
  try {
    return balance_at(design, phi, d);
  } catch (const Unreachable&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}
}  // namespace detail

/// Allocation ratio maximizing power under `method` at `d` events.
inline AllocationSolution optimal_rr(ApproxMethod method, const TrialDesign& design, double d) {
  switch (method) {
    case ApproxMethod::schoenfeld:
      return {1.0, detail::balance_or_nan(design, 1.0, d), method};
    case ApproxMethod::freedman: {
      const double phi = std::exp(-design.log_hazard_ratio());
      return {phi, detail::balance_or_nan(design, phi, d), method};
    }
    case ApproxMethod::rubinstein: {
      // log E_e/E_c is increasing in log phi; t_d moves with phi.
      const auto log_balance = [&](double log_phi) {
        return std::log(detail::balance_at(design, std::exp(log_phi), d));
      };
      double lo = std::log(0.2);
      double hi = std::log(5.0);
      double f_lo = log_balance(lo);
      double f_hi = log_balance(hi);
      for (int expand = 0; expand < 4 && (f_lo > 0.0) == (f_hi > 0.0); ++expand) {
        if (f_lo > 0.0) {
          lo -= 1.0;
          f_lo = log_balance(lo);
        } else {
          hi += 1.0;
          f_hi = log_balance(hi);
        }
      }
      if ((f_lo > 0.0) == (f_hi > 0.0)) {
        throw BracketFailure("event balance has no root for phi in [" +
                                 std::to_string(std::exp(lo)) + ", " + std::to_string(std::exp(hi)) +
                                 "]: balance " + std::to_string(std::exp(f_lo)) + " .. " +
                                 std::to_string(std::exp(f_hi)),
                             std::exp(lo), std::exp(hi), std::exp(f_lo), std::exp(f_hi));
      }
      const double phi = std::exp(solve_bracketed(log_balance, lo, hi, f_lo, f_hi));
      return {phi, detail::balance_at(design, phi, d), method};
    }
    case ApproxMethod::piecewise_mle: {
      const auto negative_abs_mu = [&](double log_phi) {
        const TrialDesign v = design.with_allocation_ratio(std::exp(log_phi));
        return -std::abs(mu_for_design(ApproxMethod::piecewise_mle, v, d).mu);
      };
      const auto best = boost::math::tools::brent_find_minima(negative_abs_mu, std::log(0.2),
                                                              std::log(5.0), 40);
      const double phi = std::exp(best.first);
      return {phi, detail::balance_or_nan(design, phi, d), method};
    }
    case ApproxMethod::empirical: break;
  }
  throw InvalidArgument("no analytic optimum for empirical power");
}

/// Piecewise-exponential proportional-hazards fit. Index 0 is control,
/// index 1 experimental; intervals with zero total exposure are dropped.
struct MleFit {
  double psi_hat = 1.0;
  std::vector<double> lambda_hat;
  double var_log_psi = 0.0;
  std::array<std::vector<double>, 2> interval_events;    // D_ij
  std::array<std::vector<double>, 2> interval_exposure;  // R_ij
  std::vector<double> interval_starts;                   // lower edge of each retained interval

  double wald_z() const { return std::log(psi_hat) / std::sqrt(var_log_psi); }
  std::size_t intervals() const noexcept { return lambda_hat.size(); }
};

inline MleFit fit_piecewise_mle(const TrialDataset& dataset, std::span<const double> knots) {
  for (std::size_t j = 0; j < knots.size(); ++j) {
    if (!(knots[j] > (j == 0 ? 0.0 : knots[j - 1]))) {
      throw InvalidArgument("knots must be positive and strictly increasing");
    }
  }
  const std::size_t intervals = knots.size() + 1;
  std::array<std::vector<double>, 2> events{std::vector<double>(intervals, 0.0),
                                            std::vector<double>(intervals, 0.0)};
  std::array<std::vector<double>, 2> exposure = events;

  for (const Observation& o : dataset.records) {
    const int i = o.arm == Arm::experimental ? 1 : 0;
    double lo = 0.0;
    for (std::size_t j = 0; j < intervals; ++j) {
      const double hi = j < knots.size() ? knots[j] : std::numeric_limits<double>::infinity();
      exposure[i][j] += std::max(0.0, std::min(hi, o.time) - lo);
      if (o.event && o.time >= lo && o.time < hi) events[i][j] += 1.0;
      lo = hi;
    }
  }

  MleFit fit;
  double d_experimental = 0.0;
  double d_control = 0.0;
  double expected_experimental = 0.0;
  double information = 0.0;
  for (std::size_t j = 0; j < intervals; ++j) {
    if (exposure[0][j] + exposure[1][j] == 0.0) continue;
    const double lambda = exposure[0][j] > 0.0 ? events[0][j] / exposure[0][j] : 0.0;
    fit.lambda_hat.push_back(lambda);
    fit.interval_starts.push_back(j == 0 ? 0.0 : knots[j - 1]);
    for (int i = 0; i < 2; ++i) {
      fit.interval_events[i].push_back(events[i][j]);
      fit.interval_exposure[i].push_back(exposure[i][j]);
    }
    d_control += events[0][j];
    d_experimental += events[1][j];
    expected_experimental += lambda * exposure[1][j];
    if (events[0][j] > 0.0 && events[1][j] > 0.0) {
      information += 1.0 / (1.0 / events[1][j] + 1.0 / events[0][j]);
    }
  }
  if (d_control == 0.0 || d_experimental == 0.0) {
    throw Degenerate("hazard ratio undefined: an arm has no events");
  }
  if (expected_experimental == 0.0 || information == 0.0) {
    throw Degenerate("hazard ratio undefined: no interval has events in both arms");
  }
  fit.psi_hat = d_experimental / expected_experimental;
  fit.var_log_psi = 1.0 / information;
  return fit;
}

struct ImbalanceEquivalence {
  double equivalent_n;     // 1:1 sample size with the same imbalance risk
  double variance_factor;  // 1 / (pi (1 - pi) n_pi)
  /// Var(mean difference) as displayed: sigma / n_pi * 1 / (pi (1 - pi)).
  double variance(double sigma) const { return sigma * variance_factor; }
};

inline ImbalanceEquivalence baseline_imbalance_equivalent_n(double n_pi, double pi) {
  if (!(pi > 0.0 && pi < 1.0)) throw InvalidArgument("allocation fraction must lie in (0, 1)");
  if (!(n_pi > 0.0)) throw InvalidArgument("sample size must be positive");
  return {n_pi * pi * (1.0 - pi) / 0.25, 1.0 / (pi * (1.0 - pi) * n_pi)};
}

}  // namespace evdesign
