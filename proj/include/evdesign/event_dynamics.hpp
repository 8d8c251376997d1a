#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "evdesign/error.hpp"
#include "evdesign/numerics.hpp"
#include "evdesign/stochastic_models.hpp"
#include "evdesign/trial_design.hpp"

namespace evdesign {

/// One arm's ingredients for the expected event curve.
struct EventCurveInputs {
  PiecewiseExponential survival;
  PiecewiseExponential dropout;
  double accrual_duration;  // r
  double n_arm;             // n*pi or n*(1-pi)
};

inline EventCurveInputs event_curve_inputs(const TrialDesign& design, Arm arm) {
  return {design.survival(arm), design.dropout, design.accrual_duration,
          design.expected_arm_size(arm)};
}

/// Sub-density of an observed event, f(y) * Lbar(y), integrated over windows
/// of follow-up time. Both the event and the dropout hazards are piecewise
/// constant, so the integrand is exponential on every merged segment.
class EventMass {
 public:
  EventMass(const PiecewiseExponential& survival, const PiecewiseExponential& dropout) {
    std::vector<double> edges(survival.cuts().begin(), survival.cuts().end());
    edges.insert(edges.end(), dropout.cuts().begin(), dropout.cuts().end());
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    double start = 0.0;
    double log_surv = 0.0;  // cumulative event + dropout hazard at `start`
    for (std::size_t i = 0; i <= edges.size(); ++i) {
      const double end = i < edges.size() ? edges[i] : std::numeric_limits<double>::infinity();
      const double h = survival.hazard(start);
      const double k = h + dropout.hazard(start);
      segments_.push_back({start, end, h, k, log_surv});
      if (i < edges.size()) log_surv += k * (end - start);
      start = end;
    }
  }

  /// Integral of f(y) Lbar(y) over [a, b], 0 <= a <= b <= inf.
  double operator()(double a, double b) const {
    if (!(b > a)) return 0.0;
    double total = 0.0;
    for (const auto& s : segments_) {
      if (s.end <= a) continue;
      if (s.start >= b) break;
      const double u = std::max(a, s.start);
      const double v = std::min(b, s.end);
      const double at_u = std::exp(-(s.log_surv_start + s.k * (u - s.start)));
      const double fraction = std::isinf(v) ? 1.0 : -std::expm1(-s.k * (v - u));
      total += s.h / s.k * at_u * fraction;
    }
    return total;
  }

  template <class F>
  void for_each_edge(F&& f) const {
    for (std::size_t i = 1; i < segments_.size(); ++i) f(segments_[i].start);
  }

 private:
  struct Segment {
    double start, end, h, k, log_surv_start;
  };
  std::vector<Segment> segments_;
};

/// Expected events by calendar time t with follow-up restricted to the
/// window [window_lo, window_hi). Outer accrual integral by adaptive
/// Gauss-Kronrod, split at the integrand's kinks.
inline double expected_events_in_window(const EventCurveInputs& in, double t, double window_lo,
                                        double window_hi) {
  if (!(t >= 0.0)) throw InvalidArgument("calendar time must be nonnegative");
  const EventMass mass(in.survival, in.dropout);
  const auto inner = [&](double follow_up) {
    return mass(std::min(window_lo, follow_up), std::min(window_hi, follow_up));
  };
  if (in.accrual_duration == 0.0) return in.n_arm * inner(t);

  const double upper = std::min(in.accrual_duration, t);
  if (!(upper > 0.0)) return 0.0;
  std::vector<double> points{0.0, upper};
  const auto add_kink = [&](double edge) {
    const double x = t - edge;
    if (x > 0.0 && x < upper) points.push_back(x);
  };
  mass.for_each_edge(add_kink);
  if (window_lo > 0.0) add_kink(window_lo);
  if (std::isfinite(window_hi)) add_kink(window_hi);
  std::sort(points.begin(), points.end());

  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    integral += integrate([&](double x) { return inner(t - x); }, points[i], points[i + 1]);
  }
  return in.n_arm / in.accrual_duration * integral;
}

/// Expected events by calendar time t, exponential survival and dropout only.
inline double expected_events_closed_form(const EventCurveInputs& in, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("calendar time must be nonnegative");
  if (!in.survival.is_exponential() || !in.dropout.is_exponential()) {
    throw InvalidArgument(
        "closed-form expected events requires exponential survival and dropout; use quadrature");
  }
  const double lambda = in.survival.hazards()[0];
  const double kappa = lambda + in.dropout.hazards()[0];
  const double r = in.accrual_duration;
  if (r == 0.0) return in.n_arm * lambda / kappa * -std::expm1(-kappa * t);
  // lambda/kappa^2 * { kappa (r ^ t) - e^{kappa((r - t) ^ 0)} + e^{-kappa t} }
  const double braces = t <= r ? exp_remainder2(kappa * t)
                               : kappa * r - std::exp(-kappa * t) * std::expm1(kappa * r);
  return in.n_arm / r * lambda / (kappa * kappa) * braces;
}

inline double expected_events_quadrature(const EventCurveInputs& in, double t) {
  return expected_events_in_window(in, t, 0.0, std::numeric_limits<double>::infinity());
}

inline double expected_events(const EventCurveInputs& in, double t) {
  if (in.survival.is_exponential() && in.dropout.is_exponential()) {
    return expected_events_closed_form(in, t);
  }
  return expected_events_quadrature(in, t);
}

/// E(D(inf)): every enrolled patient followed until event or dropout.
inline double asymptotic_events(const EventCurveInputs& in) {
  return in.n_arm * EventMass(in.survival, in.dropout)(0.0, std::numeric_limits<double>::infinity());
}

/// Expected events split by follow-up intervals delimited by `knots`
/// ([0, k_1), [k_1, k_2), ..., [k_m, inf)).
inline std::vector<double> expected_events_by_interval(const EventCurveInputs& in, double t,
                                                       std::span<const double> knots) {
  std::vector<double> out;
  out.reserve(knots.size() + 1);
  double lo = 0.0;
  for (std::size_t j = 0; j <= knots.size(); ++j) {
    const double hi = j < knots.size() ? knots[j] : std::numeric_limits<double>::infinity();
    out.push_back(expected_events_in_window(in, t, lo, hi));
    lo = hi;
  }
  return out;
}

struct ArmEvents {
  double experimental = 0.0;
  double control = 0.0;
  double total() const noexcept { return experimental + control; }
  double ratio() const noexcept { return experimental / control; }
};

inline ArmEvents expected_events_by_arm(const TrialDesign& design, double t) {
  return {expected_events(event_curve_inputs(design, Arm::experimental), t),
          expected_events(event_curve_inputs(design, Arm::control), t)};
}

inline double asymptotic_total_events(const TrialDesign& design) {
  return asymptotic_events(event_curve_inputs(design, Arm::experimental)) +
         asymptotic_events(event_curve_inputs(design, Arm::control));
}

/// Earliest calendar time at which the expected total events reach `d`.
inline double trial_duration(const TrialDesign& design, double d) {
  if (d <= 0.0) return 0.0;
  const EventCurveInputs exp_in = event_curve_inputs(design, Arm::experimental);
  const EventCurveInputs ctl_in = event_curve_inputs(design, Arm::control);
  const double asymptote = asymptotic_events(exp_in) + asymptotic_events(ctl_in);
  if (d >= asymptote * (1.0 - 1e-9)) {
    throw Unreachable("requested " + std::to_string(d) + " events but only " +
                          std::to_string(asymptote) + " are expected eventually",
                      d, asymptote);
  }
  const auto excess = [&](double t) {
    return expected_events(exp_in, t) + expected_events(ctl_in, t) - d;
  };
  double lo = 0.0;
  double f_lo = -d;
  double hi = std::max(design.accrual_duration, 1.0);
  double f_hi = excess(hi);
  while (f_hi <= 0.0) {
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    f_hi = excess(hi);
    if (hi > 1e12) throw Unreachable("event curve did not reach target", d, asymptote);
  }
  return solve_bracketed(excess, lo, hi, f_lo, f_hi);
}

struct EventRatioLimits {
  double short_trial;  // t -> 0+
  double long_trial;   // t -> inf
};

/// Limits of E(D_e(t)) / E(D_c(t)) for exponential survival, exponential
/// dropout and uniform accrual.
inline EventRatioLimits event_ratio_limits(double lambda_e, double lambda_c, double eta,
                                           double phi) {
  return {phi * lambda_e / lambda_c,
          phi * (lambda_e / (lambda_e + eta)) / (lambda_c / (lambda_c + eta))};
}

}  // namespace evdesign
